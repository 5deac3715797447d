use std::collections::{BTreeMap, BTreeSet};

use crate::engine::SimTime;
use crate::netmodel::{Body, NodeId, Packet, PacketDraft, PacketKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServerConfig {
    pub backlog_capacity: usize,
    pub half_open_timeout: SimTime,
    pub expiry_interval: SimTime,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            backlog_capacity: 256,
            half_open_timeout: SimTime::from_secs(10),
            expiry_interval: SimTime::from_millis(100),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServerCounters {
    pub syn_received: u64,
    pub syn_dropped_backlog_full: u64,
    pub established_total: u64,
    pub half_open_expired: u64,
    pub data_received: u64,
    pub udp_received: u64,
    pub ignored: u64,
}

type ConnKey = (NodeId, u32);

/// Connection state of the victim: a bounded backlog of half-open
/// handshakes and the set of established connections.
#[derive(Debug, Clone)]
pub struct ServerConnTable {
    pub id: NodeId,
    pub cfg: ServerConfig,
    half_open: BTreeMap<ConnKey, SimTime>,
    established: BTreeSet<ConnKey>,
    pub counters: ServerCounters,
    /// First time the backlog reached capacity.
    pub first_full_at: Option<SimTime>,
    pub peak_occupancy: usize,
}

impl ServerConnTable {
    pub fn new(id: NodeId, cfg: ServerConfig) -> Self {
        ServerConnTable {
            id,
            cfg,
            half_open: BTreeMap::new(),
            established: BTreeSet::new(),
            counters: ServerCounters::default(),
            first_full_at: None,
            peak_occupancy: 0,
        }
    }

    pub fn occupancy(&self) -> usize {
        self.half_open.len()
    }

    pub fn established(&self) -> usize {
        self.established.len()
    }

    pub fn is_established(&self, src: NodeId, flow_tag: u32) -> bool {
        self.established.contains(&(src, flow_tag))
    }

    pub fn on_packet(&mut self, p: &Packet, now: SimTime) -> Vec<PacketDraft> {
        debug_assert_eq!(p.dst, self.id);
        let key = (p.src, p.flow_tag);
        let me = self.id;
        let reply = |body| vec![PacketDraft::new(me, p.src, p.flow_tag, body)];
        let out = match p.kind() {
            PacketKind::Syn => {
                self.counters.syn_received += 1;
                if self.established.contains(&key) {
                    Vec::new()
                } else if self.half_open.contains_key(&key) {
                    reply(Body::SynAck)
                } else {
                    if self.half_open.len() >= self.cfg.backlog_capacity {
                        self.expire(now);
                    }
                    if self.half_open.len() >= self.cfg.backlog_capacity {
                        self.counters.syn_dropped_backlog_full += 1;
                        Vec::new()
                    } else {
                        self.half_open.insert(key, now + self.cfg.half_open_timeout);
                        self.note_occupancy(now);
                        reply(Body::SynAck)
                    }
                }
            }
            PacketKind::Ack => {
                match self.half_open.get(&key) {
                    Some(&expiry) if expiry <= now => {
                        self.half_open.remove(&key);
                        self.counters.half_open_expired += 1;
                    }
                    Some(_) => {
                        self.half_open.remove(&key);
                        self.established.insert(key);
                        self.counters.established_total += 1;
                    }
                    None => {}
                }
                Vec::new()
            }
            PacketKind::Udp => {
                self.counters.udp_received += 1;
                reply(Body::IcmpUnreach)
            }
            PacketKind::Data => {
                if self.established.contains(&key) {
                    self.counters.data_received += 1;
                } else {
                    self.counters.ignored += 1;
                }
                Vec::new()
            }
            _ => {
                self.counters.ignored += 1;
                Vec::new()
            }
        };
        self.check();
        out
    }

    /// Drop every half-open entry whose expiry is at or before `now`.
    pub fn expire(&mut self, now: SimTime) -> u64 {
        let before = self.half_open.len();
        self.half_open.retain(|_, expiry| *expiry > now);
        let n = (before - self.half_open.len()) as u64;
        self.counters.half_open_expired += n;
        n
    }

    fn note_occupancy(&mut self, now: SimTime) {
        let n = self.half_open.len();
        self.peak_occupancy = self.peak_occupancy.max(n);
        if n >= self.cfg.backlog_capacity && self.first_full_at.is_none() {
            self.first_full_at = Some(now);
        }
    }

    fn check(&self) {
        debug_assert!(self.half_open.len() <= self.cfg.backlog_capacity, "backlog overflow");
        debug_assert!(self.half_open.keys().all(|k| !self.established.contains(k)));
    }
}
