//! Discrete-event core: integer virtual clock, `(fire_at, seq)` ordered event
//! queue and the SplitMix64 generator shared by the whole simulation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Sub};

use crate::netmodel::NodeId;

/// Virtual time in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn saturating_add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_add(rhs.0).expect("virtual clock overflow"))
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_sub(rhs.0).expect("negative virtual duration"))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}s", self.0 / 1_000_000_000, self.0 % 1_000_000_000)
    }
}

/// Insertion counter of a scheduled event; unique per engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: NodeId,
    pub payload: P,
}

impl<P> Event<P> {
    fn key(&self) -> (SimTime, u64) {
        (self.fire_at, self.seq)
    }
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for Event<P> {}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Event<P> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

/// SplitMix64 pseudo-random generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prng {
    state: u64,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` built from the top 53 bits of the next output.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Virtual clock plus pending events.
///
/// Handlers are run to completion one at a time by [`Engine::run_until`] and
/// may schedule further events through the `&mut Engine` they receive.
pub struct Engine<P> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Event<P>>,
    prng: Prng,
    processed: u64,
    last_key: Option<(SimTime, u64)>,
    digest: u64,
}

impl<P> Engine<P> {
    pub fn new(seed: u64) -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            prng: Prng::new(seed),
            processed: 0,
            last_key: None,
            digest: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn prng(&mut self) -> &mut Prng {
        &mut self.prng
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Total events processed over the engine's lifetime.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Fold of every processed `(fire_at, seq, target)` triple. Equal
    /// digests mean equal processed event streams.
    pub fn trace_digest(&self) -> u64 {
        self.digest
    }

    /// Queue `payload` for delivery to `target` at `fire_at`.
    ///
    /// Panics if `fire_at` lies in the past; that is a logic error in the
    /// caller and the run cannot continue meaningfully.
    pub fn schedule(&mut self, fire_at: SimTime, target: NodeId, payload: P) -> EventId {
        assert!(
            fire_at >= self.now,
            "event scheduled in the past: fire_at={} now={} target={:?}",
            fire_at,
            self.now,
            target
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Event {
            fire_at,
            seq,
            target,
            payload,
        });
        EventId(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, target: NodeId, payload: P) -> EventId {
        self.schedule(self.now + delay, target, payload)
    }

    /// Process every event with `fire_at <= t_end`, then leave the clock at
    /// `t_end`. Returns the number of events processed by this call.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Engine<P>, Event<P>),
    {
        let res: Result<u64, std::convert::Infallible> = self.try_run_until(t_end, |eng, ev| {
            handler(eng, ev);
            Ok(())
        });
        match res {
            Ok(n) => n,
            Err(never) => match never {},
        }
    }

    /// Like [`Engine::run_until`] but stops at the first handler error. The
    /// clock is left at the failing event's time in that case.
    pub fn try_run_until<F, E>(&mut self, t_end: SimTime, mut handler: F) -> Result<u64, E>
    where
        F: FnMut(&mut Engine<P>, Event<P>) -> Result<(), E>,
    {
        let mut count = 0;
        while self.queue.peek().is_some_and(|ev| ev.fire_at <= t_end) {
            let ev = self.queue.pop().expect("peeked");
            debug_assert!(ev.fire_at >= self.now, "clock would move backwards");
            let key = ev.key();
            debug_assert!(
                self.last_key.is_none_or(|last| key > last),
                "event order violated: {:?} after {:?}",
                key,
                self.last_key
            );
            self.last_key = Some(key);
            self.now = ev.fire_at;
            self.absorb(ev.fire_at.0, ev.seq, ev.target.0 as u64);
            self.processed += 1;
            count += 1;
            handler(self, ev)?;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        Ok(count)
    }

    fn absorb(&mut self, fire_at: u64, seq: u64, target: u64) {
        for word in [fire_at, seq, target] {
            for byte in word.to_le_bytes() {
                self.digest ^= byte as u64;
                self.digest = self.digest.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
}
