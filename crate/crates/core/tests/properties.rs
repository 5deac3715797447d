use std::collections::{BTreeMap, VecDeque};

use proptest::prelude::*;

use pushback_sim::defense::{solve_minimal, verify_solution, RateLimitEntry};
use pushback_sim::endpoints::{ServerConfig, ServerConnTable};
use pushback_sim::engine::{Engine, Prng, SimTime};
use pushback_sim::netmodel::{
    Body, Direction, EnqueueOutcome, LinkQueue, NodeId, PacketFactory, PacketKind, PacketSizes, SlidingTally,
};

const SERVER: NodeId = NodeId(0);

proptest! {
    #[test]
    fn engine_pops_in_key_order(times in prop::collection::vec(0u64..50, 1..200), follow in prop::collection::vec(0u64..20, 0..200)) {
        let mut eng: Engine<usize> = Engine::new(1);
        for (i, t) in times.iter().enumerate() {
            eng.schedule(SimTime(*t), NodeId(0), i);
        }
        let mut keys = Vec::new();
        let mut k = 0;
        eng.run_until(SimTime(10_000), |eng, ev| {
            keys.push((ev.fire_at, ev.seq));
            if let Some(d) = follow.get(k) {
                k += 1;
                eng.schedule_in(SimTime(*d), NodeId(0), 0);
            }
        });
        prop_assert_eq!(keys.len(), times.len() + follow.len());
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(eng.now(), SimTime(10_000));
    }

    #[test]
    fn link_is_fifo_and_conserves(
        ops in prop::collection::vec((any::<bool>(), 0u64..2_000_000, any::<bool>()), 1..300),
        cap in 1usize..8,
    ) {
        let tally = SlidingTally::new(SimTime::from_millis(100), 10);
        let mut link = LinkQueue::new(NodeId(1), NodeId(2), 1_000_000, SimTime::from_millis(1), cap, tally);
        let mut f = PacketFactory::new(PacketSizes::default());
        let mut now = SimTime::ZERO;
        let mut pending: VecDeque<(SimTime, u64)> = VecDeque::new();
        let mut last_done = SimTime::ZERO;
        for (send, gap, bulk) in ops {
            now = now + SimTime(gap);
            // drain transmissions finished by now
            while pending.front().is_some_and(|(t, _)| *t <= now) {
                let (t, id) = pending.pop_front().unwrap();
                let p = link.complete_transmission(Direction::AtoB);
                prop_assert_eq!(p.pkt_id, id);
                prop_assert!(t >= last_done);
                last_done = t;
            }
            if send {
                let body = if bulk { Body::Data } else { Body::Syn };
                let p = f.make(NodeId(1), NodeId(2), 0, body, now);
                let id = p.pkt_id;
                match link.enqueue(Direction::AtoB, p, now) {
                    EnqueueOutcome::Accepted { tx_complete_at } => pending.push_back((tx_complete_at, id)),
                    EnqueueOutcome::Dropped => prop_assert_eq!(pending.len(), cap),
                }
            }
            let d = link.dir(Direction::AtoB);
            prop_assert!(d.queue_len() <= cap);
            prop_assert_eq!(d.queue_len(), pending.len());
            prop_assert_eq!(d.counters.arrived, d.counters.transmitted + d.counters.dropped + d.queue_len() as u64);
        }
    }

    #[test]
    fn window_matches_brute_force(
        arrivals in prop::collection::vec((0u64..5_000, 0u16..4, 1u64..2_000, any::<bool>()), 0..200),
        query in 0u64..6_000,
    ) {
        let bucket = 100u64;
        let mut arrivals = arrivals;
        arrivals.sort_by_key(|a| a.0);
        let mut tally = SlidingTally::new(SimTime(bucket), 10);
        for &(t, src, bytes, drop) in &arrivals {
            if drop {
                tally.record_drop(SimTime(t), NodeId(src), PacketKind::Syn, bytes);
            } else {
                tally.record_arrival(SimTime(t), NodeId(src), PacketKind::Syn, bytes);
            }
        }
        let query = query.max(arrivals.last().map_or(0, |a| a.0));
        let got = tally.window(SimTime(query), |_| true);
        // complete buckets inside [query - 1000, query)
        let lo = query.saturating_sub(1_000).div_ceil(bucket) * bucket;
        let hi = query / bucket * bucket;
        let mut want: BTreeMap<NodeId, (u64, u64)> = BTreeMap::new();
        for &(t, src, bytes, drop) in &arrivals {
            if t >= lo && t < hi {
                let e = want.entry(NodeId(src)).or_default();
                if drop { e.1 += bytes } else { e.0 += bytes }
            }
        }
        prop_assert_eq!(got.total_arrived, want.values().map(|v| v.0).sum::<u64>());
        prop_assert_eq!(got.total_dropped, want.values().map(|v| v.1).sum::<u64>());
        for (src, (a, d)) in want {
            let t = got.per_source.get(&src).copied().unwrap_or_default();
            prop_assert_eq!((t.arrived, t.dropped), (a, d));
        }
    }

    #[test]
    fn backlog_never_exceeds_capacity(
        ops in prop::collection::vec((0u8..3, 0u16..40, 0u32..8, 0u64..300_000_000), 1..400),
        cap in 1usize..16,
    ) {
        let cfg = ServerConfig {
            backlog_capacity: cap,
            half_open_timeout: SimTime::from_millis(700),
            expiry_interval: SimTime::from_millis(100),
        };
        let mut server = ServerConnTable::new(SERVER, cfg);
        let mut f = PacketFactory::new(PacketSizes::default());
        let mut now = SimTime::ZERO;
        for (op, host, flow, gap) in ops {
            now = now + SimTime(gap);
            let src = NodeId(host + 1);
            match op {
                0 => { server.on_packet(&f.make(src, SERVER, flow, Body::Syn, now), now); }
                1 => { server.on_packet(&f.make(src, SERVER, flow, Body::Ack, now), now); }
                _ => { server.expire(now); }
            }
            prop_assert!(server.occupancy() <= cap);
            let c = server.counters;
            prop_assert!(c.established_total + c.half_open_expired + server.occupancy() as u64 <= c.syn_received);
        }
    }

    #[test]
    fn admissions_replay_and_track_fraction(seed in any::<u64>(), frac in 0.01f64..=1.0) {
        let rl = RateLimitEntry::new(NodeId(1), SERVER, frac, SimTime::ZERO).unwrap();
        let draw = |seed| {
            let mut prng = Prng::new(seed);
            (0..2_000).map(|_| rl.admit(&mut prng)).collect::<Vec<_>>()
        };
        let a = draw(seed);
        prop_assert_eq!(&a, &draw(seed));
        let admitted = a.iter().filter(|x| matches!(x, pushback_sim::defense::Admission::Admit)).count() as f64 / 2_000.0;
        // five standard deviations
        let sd = (frac * (1.0 - frac) / 2_000.0).sqrt();
        prop_assert!((admitted - frac).abs() <= 5.0 * sd + 1e-3, "admitted {} vs {}", admitted, frac);
    }

    #[test]
    fn minimal_nonce_is_minimal(id in any::<u64>(), d in 0u32..7) {
        let n = solve_minimal(id, d);
        prop_assert!(verify_solution(id, d, n));
        prop_assert!((0..n).all(|m| !verify_solution(id, d, m)));
    }
}
