//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use pushback_sim::defense::{solve_minimal, verify_solution};
use pushback_sim::endpoints::{HostActions, PuzzleSolver};
use pushback_sim::engine::{Engine, Prng, SimTime};
use pushback_sim::metrics::check_rows;
use pushback_sim::netmodel::{Body, ChallengeMsg, NodeId};
use pushback_sim::scenario::{Overrides, ScenarioConfig};
use pushback_sim::sim::{Class, RunReport};

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

const BACKLOG: u64 = 256;

fn one_attacker() -> ScenarioConfig {
    silence(fixture("figure4"), &["node20"])
}

fn completions(r: &RunReport, cfg: &ScenarioConfig, from: f64, to: f64) -> f64 {
    window_count(&r.rows, cfg.sample_interval(), from, to, |row| row.goodput_cps.as_f64())
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

fn criterion_1() -> Outcome {
    let cfg = with_defense(one_attacker(), false);
    ensure!(
        attackers(&cfg) == ["node5"],
        "expected node5 as the only active attacker"
    );
    let (r, wall) = timed(|| run(&cfg));
    let base = run(&no_attack(cfg.clone()));

    let full = r.first_backlog_full.ok_or("backlog never filled")?;
    ensure!(
        (0.4..=1.0).contains(&secs(full)),
        "backlog full at {:.3} s, outside [0.4, 1.0]",
        secs(full)
    );
    let full_row = r
        .rows
        .iter()
        .find(|row| row.backlog_occupancy == BACKLOG)
        .ok_or("no sample at full backlog")?;
    ensure!(
        secs(full_row.time) <= 1.0 + 1e-9,
        "first full sample at {}",
        full_row.time_s()
    );

    let attacked = completions(&r, &cfg, 5.0, 15.0);
    let baseline = completions(&base, &cfg, 5.0, 15.0);
    ensure!(baseline > 0.0, "baseline has no completions");
    let ratio = attacked / baseline;
    ensure!(
        ratio < 0.05,
        "success ratio {ratio:.3} in 5-15 s ({attacked} vs {baseline})"
    );

    let both = run(&with_defense(fixture("figure4"), false));
    let both_ratio = completions(&both, &cfg, 5.0, 15.0) / baseline;
    ensure!(both_ratio < 0.05, "two-attacker success ratio {both_ratio:.3}");

    ensure!(wall < Duration::from_secs(5), "run took {wall:?}");
    Ok(format!(
        "full at {:.3} s, 5-15 s completions {attacked}/{baseline} = {:.1}%, wall {:.2} s",
        secs(full),
        ratio * 100.0,
        wall.as_secs_f64()
    ))
}

/// Worst-case time for a packet accepted at `from` to reach the server:
/// each hop's full queue of largest packets plus propagation.
fn drain_bound(r: &RunReport, cfg: &ScenarioConfig, from: NodeId) -> SimTime {
    let sizes = cfg.sizes();
    let largest = sizes.control_bytes.max(sizes.data_bytes);
    let path = r.net.path(from, r.net.server()).expect("path to server");
    let mut total = SimTime::ZERO;
    for hop in path.windows(2) {
        let (id, _) = r.net.link_between(hop[0], hop[1]).expect("adjacent");
        let l = r.net.link(id);
        let ser = l.serialization_time(largest);
        total = total + SimTime::from_nanos(ser.as_nanos() * l.capacity_pkts as u64) + l.prop_delay;
    }
    total
}

fn check_efficacy(cfg: &ScenarioConfig, r: &RunReport) -> Result<String, String> {
    let iv = cfg.sample_interval();
    let mut t_conf = SimTime::ZERO;
    let mut worst_drain = SimTime::ZERO;
    for name in attackers(cfg) {
        let host = r.net.node_by_name(&name).unwrap();
        let edge = r.net.edge_router(host).unwrap();
        let install = r
            .block_log
            .iter()
            .filter(|b| b.src == host && b.router == edge)
            .map(|b| b.at)
            .min()
            .ok_or(format!("{name} never blocked at its edge router"))?;
        ensure!(secs(install) < 5.0, "{name} blocked only at {:.3} s", secs(install));
        let last = r
            .stats
            .last_relayed_by_edge
            .get(&host)
            .copied()
            .unwrap_or(SimTime::ZERO);
        ensure!(
            last <= install,
            "{name}'s edge router relayed its traffic at {:.6} s after the block at {:.6} s",
            secs(last),
            secs(install)
        );
        t_conf = t_conf.max(install);
        worst_drain = worst_drain.max(drain_bound(r, cfg, edge));
    }
    let quiet_from = t_conf + worst_drain;
    if let Some(&last) = r.stats.last_victim_arrival.get(&Class::Attack) {
        ensure!(
            last <= quiet_from,
            "attack traffic reached the server at {:.6} s, after {:.6} s",
            secs(last),
            secs(quiet_from)
        );
    }
    for row in &r.rows {
        if row.time.saturating_sub(iv) >= quiet_from {
            ensure!(
                row.victim_in_bps_attack.0 == 0,
                "victim_in_bps_attack = {} at {}",
                row.victim_in_bps_attack,
                row.time_s()
            );
        }
    }
    Ok(format!(
        "confirmed by {:.3} s, attack-free from {:.3} s",
        secs(t_conf),
        secs(quiet_from)
    ))
}

fn criterion_2() -> Outcome {
    let one = with_defense(one_attacker(), true);
    let a = check_efficacy(&one, &run(&one))?;
    let both = with_defense(fixture("figure4"), true);
    let b = check_efficacy(&both, &run(&both))?;
    Ok(format!("one attacker: {a}; two attackers: {b}"))
}

fn criterion_3() -> Outcome {
    let cfg = with_defense(one_attacker(), true);
    let r = run(&cfg);
    let base = run(&with_defense(no_attack(cfg.clone()), false));
    let end = secs(cfg.duration());
    let got = completions(&r, &cfg, end - 10.0, end);
    let want = completions(&base, &cfg, end - 10.0, end);
    ensure!(want > 0.0, "baseline has no completions");
    let ratio = got / want;
    ensure!(
        ratio >= 0.9,
        "final 10 s completions {got} vs baseline {want} ({:.1}%)",
        ratio * 100.0
    );
    Ok(format!("final 10 s completions {got}/{want} = {:.1}%", ratio * 100.0))
}

/// (difficulty, challenge id, minimal nonce, accepted among the 100 random nonces)
/// Minimal nonces and counts computed with an independent exhaustive search.
const PUZZLE_TABLE: &[(u32, u64, u64, u32)] = &[
    (0, 0x9f6d8fecf88eecd5, 0, 100),
    (0, 0x18e430bb1511f2d2, 0, 100),
    (0, 0x4c6f7cbf58dba57f, 0, 100),
    (0, 0x1dbe69e0ae9bb859, 0, 100),
    (0, 0xd4a0c1656476437a, 0, 100),
    (0, 0x8d6b7b6d69455aeb, 0, 100),
    (0, 0x230249cae3603297, 0, 100),
    (0, 0x98aa033e99c4a792, 0, 100),
    (0, 0x2b39e8e05ba9e530, 0, 100),
    (0, 0x6d467b84dc360331, 0, 100),
    (4, 0x9f6d8fecf88eecd5, 30, 6),
    (4, 0x18e430bb1511f2d2, 3, 8),
    (4, 0x4c6f7cbf58dba57f, 28, 9),
    (4, 0x1dbe69e0ae9bb859, 16, 5),
    (4, 0xd4a0c1656476437a, 82, 4),
    (4, 0x8d6b7b6d69455aeb, 0, 7),
    (4, 0x230249cae3603297, 23, 6),
    (4, 0x98aa033e99c4a792, 11, 3),
    (4, 0x2b39e8e05ba9e530, 5, 6),
    (4, 0x6d467b84dc360331, 3, 4),
    (8, 0x9f6d8fecf88eecd5, 1065, 0),
    (8, 0x18e430bb1511f2d2, 3, 1),
    (8, 0x4c6f7cbf58dba57f, 134, 0),
    (8, 0x1dbe69e0ae9bb859, 361, 0),
    (8, 0xd4a0c1656476437a, 151, 0),
    (8, 0x8d6b7b6d69455aeb, 21, 1),
    (8, 0x230249cae3603297, 258, 0),
    (8, 0x98aa033e99c4a792, 92, 0),
    (8, 0x2b39e8e05ba9e530, 193, 0),
    (8, 0x6d467b84dc360331, 727, 0),
    (12, 0x9f6d8fecf88eecd5, 8894, 0),
    (12, 0x18e430bb1511f2d2, 2041, 0),
    (12, 0x4c6f7cbf58dba57f, 1028, 0),
    (12, 0x1dbe69e0ae9bb859, 2531, 0),
    (12, 0xd4a0c1656476437a, 2307, 0),
    (12, 0x8d6b7b6d69455aeb, 918, 0),
    (12, 0x230249cae3603297, 2301, 0),
    (12, 0x98aa033e99c4a792, 5454, 0),
    (12, 0x2b39e8e05ba9e530, 1150, 0),
    (12, 0x6d467b84dc360331, 3897, 0),
];

/// Leading zero bits of SHA-256(be64(id) || be64(nonce)), bit by bit.
fn naive_accepts(id: u64, d: u32, nonce: u64) -> bool {
    let mut h = Sha256::new();
    h.update(id.to_be_bytes());
    h.update(nonce.to_be_bytes());
    let digest = h.finalize();
    (0..d as usize).all(|i| digest[i / 8] & (0x80 >> (i % 8)) == 0)
}

fn submitted_nonce(id: u64, d: u32) -> u64 {
    let me = NodeId(1);
    let mut solver = PuzzleSolver::new(SimTime::from_micros(1));
    let ch = ChallengeMsg {
        challenge_id: id,
        difficulty_bits: d,
        issued_by: NodeId(2),
        deadline: SimTime::from_secs(2),
    };
    let (at, timer) = solver
        .on_challenge(&ch, SimTime::ZERO)
        .expect("idle solver starts at once");
    let mut out = HostActions::default();
    solver.on_done(me, timer, at, &mut out);
    match &out.sends[..] {
        [p] => match &p.body {
            Body::PuzzleResponse(resp) if resp.challenge_id == id => resp.nonce,
            other => panic!("unexpected reply {other:?}"),
        },
        other => panic!("expected one reply, got {}", other.len()),
    }
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let mut ids = Prng::new(2024);
    let drawn: Vec<u64> = (0..10).map(|_| ids.next_u64()).collect();
    let mut checked = 0;
    for &(d, id, min, accepted) in PUZZLE_TABLE {
        ensure!(drawn.contains(&id), "challenge id {id:#x} not among the PRNG draws");
        let got = submitted_nonce(id, d);
        ensure!(got == min, "d={d} id={id:#x}: submitted {got}, minimum {min}");
        ensure!(
            solve_minimal(id, d) == min,
            "solve_minimal disagrees for d={d} id={id:#x}"
        );
        ensure!(verify_solution(id, d, min), "d={d} id={id:#x}: minimum rejected");
        ensure!(
            naive_accepts(id, d, min),
            "oracle rejects table minimum d={d} id={id:#x}"
        );

        let mut draws = Prng::new(id ^ d as u64);
        let mut count = 0;
        for _ in 0..100 {
            let mut n = draws.next_u64();
            if n == min {
                n ^= 1;
            }
            let v = verify_solution(id, d, n);
            ensure!(
                v == naive_accepts(id, d, n),
                "d={d} id={id:#x} nonce={n}: verify_solution={v}"
            );
            count += v as u32;
            checked += 1;
        }
        ensure!(
            count == accepted,
            "d={d} id={id:#x}: {count} random nonces accepted, expected {accepted}"
        );
    }
    let wall = t0.elapsed();
    ensure!(wall < Duration::from_secs(10), "took {wall:?}");
    Ok(format!(
        "{} challenges, {checked} random nonces, wall {:.2} s",
        PUZZLE_TABLE.len(),
        wall.as_secs_f64()
    ))
}

fn criterion_5() -> Outcome {
    let cfg = fixture("smart");
    let initial = cfg.defense.difficulty_initial;
    let r = run(&cfg);
    let mut prev = initial;
    let mut rises = Vec::new();
    for row in &r.rows {
        let d = row.difficulty_bits;
        if d != prev {
            ensure!(d == prev + 1, "difficulty {prev} -> {d} at {}", row.time_s());
            rises.push((row.time_s(), d, row.puzzles_solved));
        }
        prev = d;
    }
    let (at, _, solved) = rises.first().ok_or("difficulty never rose")?.clone();
    ensure!(solved >= 20, "first rise at {at} after only {solved} solved");

    for (name, cfg) in [
        ("figure4", with_defense(fixture("figure4"), true)),
        ("one attacker", with_defense(one_attacker(), true)),
        ("udp", with_defense(fixture("udp"), true)),
    ] {
        let r = run(&cfg);
        let max = r.rows.iter().map(|row| row.difficulty_bits).max().unwrap_or(0);
        ensure!(
            max <= cfg.defense.difficulty_initial,
            "{name}: difficulty reached {max}"
        );
    }
    let steps: Vec<String> = rises.iter().map(|(t, d, _)| format!("{d}@{t}s")).collect();
    Ok(format!(
        "smart: {initial} then {} (first after {solved} solved); naive runs flat",
        steps.join(", ")
    ))
}

fn criterion_6() -> Outcome {
    let mut runs = 0;
    for name in FIXTURES {
        for on in [true, false] {
            let cfg = with_defense(fixture(name), on);
            let a = run(&cfg);
            let b = run(&cfg);
            ensure!(
                csv_bytes(&a.rows) == csv_bytes(&b.rows),
                "{name} defense={on}: CSVs differ"
            );
            ensure!(
                a.trace_digest == b.trace_digest,
                "{name} defense={on}: event traces differ"
            );
            runs += 2;
        }
        let off = with_defense(fixture(name), false);
        let mut reseeded = off.clone();
        reseeded
            .apply(&Overrides {
                seed: Some(off.run.seed + 99),
                ..Overrides::default()
            })
            .unwrap();
        ensure!(
            csv_bytes(&run(&off).rows) == csv_bytes(&run(&reseeded).rows),
            "{name}: seed changed a defense-off run"
        );
        let echo_a = off.to_json();
        let echo_b = reseeded.to_json();
        let diff: Vec<(&str, &str)> = echo_a.lines().zip(echo_b.lines()).filter(|(x, y)| x != y).collect();
        ensure!(
            echo_a.lines().count() == echo_b.lines().count()
                && diff.len() == 1
                && diff[0].0.trim_start().starts_with("\"seed\""),
            "{name}: config echo differs beyond the seed: {diff:?}"
        );
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_pushback-sim");
    let mut files = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}.csv"));
        let st = Command::new(bin)
            .arg("run")
            .arg(fixture_path("figure4"))
            .args(["--seed", "7", "--duration", "10", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            st.status.success(),
            "binary failed: {}",
            String::from_utf8_lossy(&st.stderr)
        );
        files.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure!(files[0] == files[1], "binary CSV files differ");
    Ok(format!(
        "{runs} paired runs identical, CLI output files identical, seed only touches the echo's seed line"
    ))
}

fn criterion_7() -> Outcome {
    let mut runs = 0;
    for name in FIXTURES {
        for on in [true, false] {
            let cfg = with_defense(fixture(name), on);
            let r = run(&cfg);
            ensure!(
                r.links_conserve,
                "{name} defense={on}: a link does not conserve packets"
            );
            for l in r.net.links() {
                for dir in [
                    pushback_sim::netmodel::Direction::AtoB,
                    pushback_sim::netmodel::Direction::BtoA,
                ] {
                    let d = l.dir(dir);
                    let c = d.counters;
                    ensure!(
                        c.arrived == c.transmitted + c.dropped + d.queue_len() as u64,
                        "{name} defense={on}: link {}-{} breaks conservation",
                        r.net.node(l.a).name,
                        r.net.node(l.b).name
                    );
                }
            }
            ensure!(
                r.stats.max_backlog <= r.backlog_capacity && r.backlog_capacity as u64 == BACKLOG,
                "{name} defense={on}: backlog peaked at {}",
                r.stats.max_backlog
            );

            let server = r.net.server();
            let mut sent: BTreeMap<Class, u64> = BTreeMap::new();
            for l in r.net.links() {
                if let Some(dir) = l.direction_from(if l.a == server { l.b } else { l.a }) {
                    if l.receiver(dir) != server {
                        continue;
                    }
                    for (src, pb) in &l.dir(dir).sent_by_src {
                        *sent.entry(Class::of(r.net.node(*src).kind)).or_default() += pb.bytes;
                    }
                }
            }
            for (class, bytes) in &sent {
                let got = r.stats.victim_bytes.get(class).copied().unwrap_or(0)
                    + r.stats.victim_inflight_bytes.get(class).copied().unwrap_or(0);
                ensure!(
                    got == *bytes,
                    "{name} defense={on}: {class:?} bytes {got} delivered+inflight vs {bytes} sent"
                );
            }
            let vb = |c| r.stats.victim_bytes.get(&c).copied().unwrap_or(0);
            ensure!(
                r.totals.victim_bytes_legit == vb(Class::Legit) && r.totals.victim_bytes_attack == vb(Class::Attack),
                "{name} defense={on}: sampled victim bytes disagree with delivery counts"
            );
            check_rows(&r.rows).map_err(|e| format!("{name} defense={on}: {e}"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs conserve on every link, backlog within {BACKLOG}"))
}

fn criterion_8() -> Outcome {
    const TOTAL: u64 = 1_000_000;
    let mut eng: Engine<u32> = Engine::new(5);
    let mut rng = Prng::new(0xfeed);
    let mut scheduled = 0u64;
    for _ in 0..64 {
        eng.schedule(SimTime::from_nanos(rng.next_u64() % 1000), NodeId(0), 0);
        scheduled += 1;
    }
    let mut seen: Vec<(SimTime, u64)> = Vec::with_capacity(TOTAL as usize);
    eng.run_until(SimTime::MAX, |eng, ev| {
        seen.push((ev.fire_at, ev.seq));
        let extra = rng.next_u64() % 3;
        for _ in 0..extra {
            if scheduled >= TOTAL {
                break;
            }
            let r = rng.next_u64();
            // a quarter of follow-ups land at the same instant
            let delay = if r.is_multiple_of(4) { 0 } else { r % 5000 };
            eng.schedule_in(SimTime::from_nanos(delay), NodeId((r >> 32) as u16 % 8), ev.payload + 1);
            scheduled += 1;
        }
        if eng.pending() == 0 && scheduled < TOTAL {
            eng.schedule_in(SimTime::ZERO, NodeId(0), 0);
            scheduled += 1;
        }
    });
    ensure!(seen.len() as u64 == TOTAL, "processed {} events", seen.len());
    let same_instant = seen.windows(2).filter(|w| w[0].0 == w[1].0).count();
    for (i, w) in seen.windows(2).enumerate() {
        ensure!(w[0] < w[1], "event {} {:?} not after {:?}", i + 1, w[1], w[0]);
    }
    ensure!(same_instant > 0, "fuzz produced no simultaneous events");
    Ok(format!(
        "{TOTAL} events strictly increasing, {same_instant} same-instant successors"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("overwhelm", criterion_1),
        ("defense efficacy", criterion_2),
        ("legitimate recovery", criterion_3),
        ("puzzle oracle", criterion_4),
        ("adaptive difficulty", criterion_5),
        ("determinism", criterion_6),
        ("conservation", criterion_7),
        ("event order", criterion_8),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let res = match panic::catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => Err(format!(
                "panicked: {}",
                e.downcast_ref::<String>()
                    .map(String::as_str)
                    .or(e.downcast_ref::<&str>().copied())
                    .unwrap_or("?")
            )),
        };
        match res {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
