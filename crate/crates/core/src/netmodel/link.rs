//! Point-to-point links with one drop-tail FIFO per direction.

use std::collections::{BTreeMap, VecDeque};

use crate::engine::SimTime;

use super::packet::{Packet, PacketKind};
use super::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    AtoB,
    BtoA,
}

impl Direction {
    fn index(self) -> usize {
        match self {
            Direction::AtoB => 0,
            Direction::BtoA => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirCounters {
    pub arrived: u64,
    pub transmitted: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteTally {
    pub arrived: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PacketBytes {
    pub packets: u64,
    pub bytes: u64,
}

/// Per-source byte totals over one observation window.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WindowStats {
    pub per_source: BTreeMap<NodeId, ByteTally>,
    pub total_arrived: u64,
    pub total_dropped: u64,
}

impl WindowStats {
    pub fn add(&mut self, src: NodeId, tally: ByteTally) {
        let entry = self.per_source.entry(src).or_default();
        entry.arrived += tally.arrived;
        entry.dropped += tally.dropped;
        self.total_arrived += tally.arrived;
        self.total_dropped += tally.dropped;
    }
}

type Bucket = (u64, BTreeMap<(NodeId, PacketKind), ByteTally>);

/// Per-(src, kind) byte accounting in fixed-width time buckets.
#[derive(Debug, Clone)]
pub struct SlidingTally {
    bucket: SimTime,
    buckets_per_window: u64,
    ring: VecDeque<Bucket>,
}

impl SlidingTally {
    pub fn new(bucket: SimTime, buckets_per_window: u64) -> Self {
        assert!(bucket.0 > 0 && buckets_per_window > 0);
        SlidingTally {
            bucket,
            buckets_per_window,
            ring: VecDeque::new(),
        }
    }

    pub fn record_arrival(&mut self, now: SimTime, src: NodeId, kind: PacketKind, bytes: u64) {
        self.slot(now, src, kind).arrived += bytes;
    }

    pub fn record_drop(&mut self, now: SimTime, src: NodeId, kind: PacketKind, bytes: u64) {
        self.slot(now, src, kind).dropped += bytes;
    }

    fn slot(&mut self, now: SimTime, src: NodeId, kind: PacketKind) -> &mut ByteTally {
        let idx = now.0 / self.bucket.0;
        if self.ring.back().is_none_or(|(i, _)| *i != idx) {
            self.ring.push_back((idx, BTreeMap::new()));
            // one spare bucket beyond the window covers unaligned queries
            while self.ring.len() as u64 > self.buckets_per_window + 1 {
                self.ring.pop_front();
            }
        }
        self.ring
            .back_mut()
            .expect("just pushed")
            .1
            .entry((src, kind))
            .or_default()
    }

    /// Sum of complete buckets lying inside `[now - window, now)`.
    pub fn window(&self, now: SimTime, include: impl Fn(PacketKind) -> bool) -> WindowStats {
        let width = self.bucket.0;
        let span = width * self.buckets_per_window;
        let first = now.0.saturating_sub(span).div_ceil(width);
        let end = now.0 / width;
        let mut stats = WindowStats::default();
        for (idx, map) in &self.ring {
            if *idx < first || *idx >= end {
                continue;
            }
            for ((src, kind), tally) in map {
                if include(*kind) {
                    stats.add(*src, *tally);
                }
            }
        }
        stats
    }
}

#[derive(Debug, Clone)]
pub struct LinkDirection {
    fifo: VecDeque<Packet>,
    busy_until: SimTime,
    pub counters: DirCounters,
    pub tally: SlidingTally,
    /// Cumulative transmissions attributed to each source.
    pub sent_by_src: BTreeMap<NodeId, PacketBytes>,
    /// Latest time a non-defense-plane packet of each source was accepted.
    pub last_data_enqueue: BTreeMap<NodeId, SimTime>,
}

impl LinkDirection {
    fn new(tally: SlidingTally) -> Self {
        LinkDirection {
            fifo: VecDeque::new(),
            busy_until: SimTime::ZERO,
            counters: DirCounters::default(),
            tally,
            sent_by_src: BTreeMap::new(),
            last_data_enqueue: BTreeMap::new(),
        }
    }

    pub fn queue_len(&self) -> usize {
        self.fifo.len()
    }

    pub fn busy_until(&self) -> SimTime {
        self.busy_until
    }

    /// arrived = transmitted + dropped + residual queue length.
    pub fn conserves(&self) -> bool {
        self.counters.arrived == self.counters.transmitted + self.counters.dropped + self.fifo.len() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted { tx_complete_at: SimTime },
    Dropped,
}

#[derive(Debug, Clone)]
pub struct LinkQueue {
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth_bps: u64,
    pub prop_delay: SimTime,
    pub capacity_pkts: usize,
    dirs: [LinkDirection; 2],
}

impl LinkQueue {
    pub fn new(
        a: NodeId,
        b: NodeId,
        bandwidth_bps: u64,
        prop_delay: SimTime,
        capacity_pkts: usize,
        tally: SlidingTally,
    ) -> Self {
        assert!(bandwidth_bps > 0, "zero-bandwidth link");
        LinkQueue {
            a,
            b,
            bandwidth_bps,
            prop_delay,
            capacity_pkts,
            dirs: [LinkDirection::new(tally.clone()), LinkDirection::new(tally)],
        }
    }

    pub fn direction_from(&self, from: NodeId) -> Option<Direction> {
        if from == self.a {
            Some(Direction::AtoB)
        } else if from == self.b {
            Some(Direction::BtoA)
        } else {
            None
        }
    }

    pub fn receiver(&self, dir: Direction) -> NodeId {
        match dir {
            Direction::AtoB => self.b,
            Direction::BtoA => self.a,
        }
    }

    pub fn sender(&self, dir: Direction) -> NodeId {
        match dir {
            Direction::AtoB => self.a,
            Direction::BtoA => self.b,
        }
    }

    pub fn dir(&self, dir: Direction) -> &LinkDirection {
        &self.dirs[dir.index()]
    }

    pub fn dir_mut(&mut self, dir: Direction) -> &mut LinkDirection {
        &mut self.dirs[dir.index()]
    }

    /// Time to clock `bytes` onto the wire, truncated to whole nanoseconds.
    pub fn serialization_time(&self, bytes: u32) -> SimTime {
        SimTime((bytes as u128 * 8 * 1_000_000_000 / self.bandwidth_bps as u128) as u64)
    }

    /// Offer a packet to the drop-tail queue. On acceptance the caller must
    /// schedule [`LinkQueue::complete_transmission`] at `tx_complete_at`.
    pub fn enqueue(&mut self, dir: Direction, p: Packet, now: SimTime) -> EnqueueOutcome {
        let ser = self.serialization_time(p.size_bytes);
        let capacity = self.capacity_pkts;
        let d = self.dir_mut(dir);
        let kind = p.kind();
        let bytes = p.size_bytes as u64;
        d.counters.arrived += 1;
        d.tally.record_arrival(now, p.src, kind, bytes);
        if d.fifo.len() >= capacity {
            d.counters.dropped += 1;
            d.tally.record_drop(now, p.src, kind, bytes);
            return EnqueueOutcome::Dropped;
        }
        let tx_complete_at = d.busy_until.max(now) + ser;
        d.busy_until = tx_complete_at;
        if !kind.is_defense_plane() {
            d.last_data_enqueue.insert(p.src, now);
        }
        d.fifo.push_back(p);
        debug_assert!(d.fifo.len() <= capacity);
        EnqueueOutcome::Accepted { tx_complete_at }
    }

    /// Pop the head packet whose serialization just finished. It reaches the
    /// receiver `prop_delay` later.
    pub fn complete_transmission(&mut self, dir: Direction) -> Packet {
        let d = self.dir_mut(dir);
        let p = d.fifo.pop_front().expect("transmission completed on an empty queue");
        d.counters.transmitted += 1;
        let e = d.sent_by_src.entry(p.src).or_default();
        e.packets += 1;
        e.bytes += p.size_bytes as u64;
        p
    }
}
