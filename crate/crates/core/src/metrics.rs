//! Periodic samples of traffic and defense state, written as CSV.

use std::fmt;
use std::io::{self, Write};

use crate::engine::SimTime;

pub const CSV_HEADER: &str = "time_s,legit_pps,attack_pps,victim_in_bps_legit,victim_in_bps_attack,backlog_occupancy,goodput_cps,active_blocks,rate_limited_pps,puzzles_issued,puzzles_solved,puzzles_failed,difficulty_bits";

/// A non-negative rate held in thousandths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Milli(pub u64);

impl Milli {
    /// `count` events over `interval`, per second, rounded half up.
    pub fn per_second(count: u64, interval: SimTime) -> Milli {
        let d = interval.as_nanos() as u128;
        assert!(d > 0, "zero sample interval");
        let num = count as u128 * 1_000_000_000_000;
        Milli(((num + d / 2) / d) as u64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for Milli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (whole, frac) = (self.0 / 1000, self.0 % 1000);
        if frac == 0 {
            return write!(f, "{whole}");
        }
        let digits = format!("{frac:03}");
        write!(f, "{whole}.{}", digits.trim_end_matches('0'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRow {
    pub time: SimTime,
    pub legit_pps: Milli,
    pub attack_pps: Milli,
    pub victim_in_bps_legit: Milli,
    pub victim_in_bps_attack: Milli,
    pub backlog_occupancy: u64,
    pub goodput_cps: Milli,
    pub active_blocks: u64,
    pub rate_limited_pps: Milli,
    pub puzzles_issued: u64,
    pub puzzles_solved: u64,
    pub puzzles_failed: u64,
    pub difficulty_bits: u32,
}

impl SampleRow {
    pub fn time_s(&self) -> String {
        let ns = self.time.as_nanos();
        format!("{}.{:03}", ns / 1_000_000_000, (ns % 1_000_000_000) / 1_000_000)
    }
}

impl fmt::Display for SampleRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.time_s(),
            self.legit_pps,
            self.attack_pps,
            self.victim_in_bps_legit,
            self.victim_in_bps_attack,
            self.backlog_occupancy,
            self.goodput_cps,
            self.active_blocks,
            self.rate_limited_pps,
            self.puzzles_issued,
            self.puzzles_solved,
            self.puzzles_failed,
            self.difficulty_bits
        )
    }
}

/// Event counts accumulated between samples, split by the sender's true class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntervalCounters {
    pub legit_pkts: u64,
    pub attack_pkts: u64,
    pub victim_bytes_legit: u64,
    pub victim_bytes_attack: u64,
    pub completed: u64,
    pub rate_limited: u64,
}

impl IntervalCounters {
    fn add(&mut self, o: &IntervalCounters) {
        self.legit_pkts += o.legit_pkts;
        self.attack_pkts += o.attack_pkts;
        self.victim_bytes_legit += o.victim_bytes_legit;
        self.victim_bytes_attack += o.victim_bytes_attack;
        self.completed += o.completed;
        self.rate_limited += o.rate_limited;
    }
}

/// Point-in-time values read from the server and defense at sample time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Snapshot {
    pub backlog_occupancy: u64,
    pub active_blocks: u64,
    pub puzzles_issued: u64,
    pub puzzles_solved: u64,
    pub puzzles_failed: u64,
    pub difficulty_bits: u32,
}

#[derive(Debug, Clone)]
pub struct MetricsRecorder {
    pub interval: SimTime,
    pub current: IntervalCounters,
    totals: IntervalCounters,
    rows: Vec<SampleRow>,
}

impl MetricsRecorder {
    pub fn new(interval: SimTime) -> Self {
        assert!(interval > SimTime::ZERO, "zero sample interval");
        MetricsRecorder {
            interval,
            current: IntervalCounters::default(),
            totals: IntervalCounters::default(),
            rows: Vec::new(),
        }
    }

    /// Close the current interval at `now` and start the next.
    pub fn sample(&mut self, now: SimTime, snap: Snapshot) -> &SampleRow {
        let c = std::mem::take(&mut self.current);
        self.totals.add(&c);
        let iv = self.interval;
        self.rows.push(SampleRow {
            time: now,
            legit_pps: Milli::per_second(c.legit_pkts, iv),
            attack_pps: Milli::per_second(c.attack_pkts, iv),
            victim_in_bps_legit: Milli::per_second(c.victim_bytes_legit * 8, iv),
            victim_in_bps_attack: Milli::per_second(c.victim_bytes_attack * 8, iv),
            backlog_occupancy: snap.backlog_occupancy,
            goodput_cps: Milli::per_second(c.completed, iv),
            active_blocks: snap.active_blocks,
            rate_limited_pps: Milli::per_second(c.rate_limited, iv),
            puzzles_issued: snap.puzzles_issued,
            puzzles_solved: snap.puzzles_solved,
            puzzles_failed: snap.puzzles_failed,
            difficulty_bits: snap.difficulty_bits,
        });
        self.rows.last().expect("just pushed")
    }

    pub fn rows(&self) -> &[SampleRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<SampleRow> {
        self.rows
    }

    /// Counts over every closed interval plus the open one.
    pub fn totals(&self) -> IntervalCounters {
        let mut t = self.totals;
        t.add(&self.current);
        t
    }
}

/// Write the header and rows. Returns the number of bytes written.
pub fn write_csv<W: Write>(rows: &[SampleRow], mut out: W) -> io::Result<u64> {
    let mut text = String::with_capacity(CSV_HEADER.len() + 1 + rows.len() * 64);
    text.push_str(CSV_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(text.len() as u64)
}

/// Check the row-level invariants: puzzle outcomes never exceed issuance and
/// cumulative columns never decrease.
pub fn check_rows(rows: &[SampleRow]) -> Result<(), String> {
    for (i, r) in rows.iter().enumerate() {
        if r.puzzles_solved + r.puzzles_failed > r.puzzles_issued {
            return Err(format!("row {i}: solved + failed exceeds issued"));
        }
        if i > 0 {
            let p = &rows[i - 1];
            if r.time <= p.time {
                return Err(format!("row {i}: time not increasing"));
            }
            if r.puzzles_issued < p.puzzles_issued
                || r.puzzles_solved < p.puzzles_solved
                || r.puzzles_failed < p.puzzles_failed
            {
                return Err(format!("row {i}: cumulative column decreased"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const IV: SimTime = SimTime::from_millis(100);

    #[test]
    fn empty_interval_is_all_zero() {
        let mut m = MetricsRecorder::new(IV);
        let snap = Snapshot {
            backlog_occupancy: 17,
            difficulty_bits: 8,
            ..Snapshot::default()
        };
        let r = m.sample(IV, snap).to_string();
        assert_eq!(r, "0.100,0,0,0,0,17,0,0,0,0,0,0,8");
    }

    #[test]
    fn fifty_packets_in_100ms_is_500pps() {
        let mut m = MetricsRecorder::new(IV);
        m.current.attack_pkts = 50;
        m.current.completed = 3;
        m.current.victim_bytes_attack = 2000;
        let r = m.sample(IV, Snapshot::default()).clone();
        assert_eq!(r.attack_pps, Milli(500_000));
        assert_eq!(r.goodput_cps, Milli(30_000));
        assert_eq!(r.victim_in_bps_attack.to_string(), "160000");
    }

    #[test]
    fn tenth_sample_time() {
        let mut m = MetricsRecorder::new(IV);
        for k in 1..=10 {
            m.sample(SimTime::from_millis(100 * k), Snapshot::default());
        }
        assert_eq!(m.rows()[9].time_s(), "1.000");
    }

    #[test]
    fn fractional_rates_trim_zeros() {
        assert_eq!(Milli(1_500).to_string(), "1.5");
        assert_eq!(Milli(1_234).to_string(), "1.234");
        assert_eq!(Milli(50).to_string(), "0.05");
        assert_eq!(Milli::per_second(1, SimTime::from_millis(300)).to_string(), "3.333");
        assert_eq!(Milli::per_second(2, SimTime::from_millis(300)).to_string(), "6.667");
    }

    #[test]
    fn no_rows_writes_header_only() {
        let mut buf = Vec::new();
        let n = write_csv(&[], &mut buf).unwrap();
        assert_eq!(buf, format!("{CSV_HEADER}\n").into_bytes());
        assert_eq!(n as usize, buf.len());
    }

    #[test]
    fn header_columns_in_order() {
        let cols: Vec<_> = CSV_HEADER.split(',').collect();
        assert_eq!(cols.len(), 13);
        assert_eq!(cols[0], "time_s");
        assert_eq!(cols[12], "difficulty_bits");
    }

    #[test]
    fn totals_include_open_interval() {
        let mut m = MetricsRecorder::new(IV);
        m.current.legit_pkts = 4;
        m.sample(IV, Snapshot::default());
        m.current.legit_pkts = 1;
        assert_eq!(m.totals().legit_pkts, 5);
    }

    #[test]
    fn row_checks_catch_regressions() {
        let mut m = MetricsRecorder::new(IV);
        m.sample(
            IV,
            Snapshot {
                puzzles_issued: 2,
                puzzles_solved: 1,
                ..Snapshot::default()
            },
        );
        m.sample(
            IV + IV,
            Snapshot {
                puzzles_issued: 2,
                puzzles_solved: 0,
                ..Snapshot::default()
            },
        );
        assert!(check_rows(m.rows()).is_err());
        assert!(check_rows(&m.rows()[..1]).is_ok());
    }

    proptest! {
        #[test]
        fn rendered_rates_round_trip(v in 0u64..10_000_000_000) {
            let s = Milli(v).to_string();
            prop_assert!(s.is_ascii());
            let parsed: f64 = s.parse().unwrap();
            prop_assert_eq!((parsed * 1000.0).round() as u64, v);
            if let Some((_, frac)) = s.split_once('.') {
                prop_assert!(frac.len() <= 3 && !frac.ends_with('0'));
            }
        }
    }
}
