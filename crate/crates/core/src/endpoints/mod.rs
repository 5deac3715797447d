//! Behavioural models for the victim server, legitimate clients and attackers.

pub mod attacker;
pub mod client;
pub mod server;

use std::collections::VecDeque;

use crate::defense::solve_minimal;
use crate::engine::SimTime;
use crate::netmodel::{Body, ChallengeMsg, NodeId, Packet, PacketDraft, ResponseMsg};

pub use attacker::{AttackMode, Attacker, AttackerConfig};
pub use client::{ClientConfig, LegitClient, PendingAttempt};
pub use server::{ServerConfig, ServerConnTable, ServerCounters};

/// Timers a host asks the simulation to schedule on its behalf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HostTimer {
    Tick,
    Rto {
        flow_tag: u32,
        retries: u32,
    },
    SolveDone {
        issued_by: NodeId,
        challenge_id: u64,
        nonce: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HostActions {
    pub sends: Vec<PacketDraft>,
    pub timers: Vec<(SimTime, HostTimer)>,
}

impl HostActions {
    pub fn is_empty(&self) -> bool {
        self.sends.is_empty() && self.timers.is_empty()
    }
}

/// Works through received challenges one at a time. Solving the minimal
/// nonce `n` costs `(n + 1) * hash_cost`.
#[derive(Debug, Clone)]
pub struct PuzzleSolver {
    pub hash_cost: SimTime,
    solving_until: Option<SimTime>,
    queue: VecDeque<ChallengeMsg>,
    pub solved: u64,
}

impl PuzzleSolver {
    pub fn new(hash_cost: SimTime) -> Self {
        PuzzleSolver {
            hash_cost,
            solving_until: None,
            queue: VecDeque::new(),
            solved: 0,
        }
    }

    pub fn is_solving(&self) -> bool {
        self.solving_until.is_some()
    }

    pub fn solving_until(&self) -> Option<SimTime> {
        self.solving_until
    }

    /// Time at which solving `ch` started at `now` completes, with its nonce.
    pub fn solve_time(&self, ch: &ChallengeMsg) -> (u64, SimTime) {
        let nonce = solve_minimal(ch.challenge_id, ch.difficulty_bits);
        let cost = nonce
            .checked_add(1)
            .and_then(|n| n.checked_mul(self.hash_cost.as_nanos()))
            .expect("solve time overflows");
        (nonce, SimTime::from_nanos(cost))
    }

    fn start(&mut self, ch: ChallengeMsg, now: SimTime) -> (SimTime, HostTimer) {
        let (nonce, cost) = self.solve_time(&ch);
        let done = now + cost;
        self.solving_until = Some(done);
        (
            done,
            HostTimer::SolveDone {
                issued_by: ch.issued_by,
                challenge_id: ch.challenge_id,
                nonce,
            },
        )
    }

    pub fn on_challenge(&mut self, ch: &ChallengeMsg, now: SimTime) -> Option<(SimTime, HostTimer)> {
        if self.is_solving() {
            self.queue.push_back(ch.clone());
            None
        } else {
            Some(self.start(ch.clone(), now))
        }
    }

    /// Emit the response for the finished puzzle and start the next queued one.
    pub fn on_done(&mut self, me: NodeId, timer: HostTimer, now: SimTime, out: &mut HostActions) {
        let HostTimer::SolveDone {
            issued_by,
            challenge_id,
            nonce,
        } = timer
        else {
            return;
        };
        self.solving_until = None;
        self.solved += 1;
        out.sends.push(PacketDraft::new(
            me,
            issued_by,
            0,
            Body::PuzzleResponse(ResponseMsg { challenge_id, nonce }),
        ));
        if let Some(next) = self.queue.pop_front() {
            out.timers.push(self.start(next, now));
        }
    }
}

/// A traffic-originating host.
#[derive(Debug, Clone)]
pub enum Host {
    Legit(LegitClient),
    Attacker(Attacker),
}

impl Host {
    pub fn id(&self) -> NodeId {
        match self {
            Host::Legit(c) => c.id,
            Host::Attacker(a) => a.id,
        }
    }

    pub fn is_attacker(&self) -> bool {
        matches!(self, Host::Attacker(_))
    }

    /// When the first periodic tick fires, if ever.
    pub fn first_tick(&self) -> Option<SimTime> {
        match self {
            Host::Legit(c) => c.first_tick(),
            Host::Attacker(a) => a.first_tick(),
        }
    }

    pub fn on_timer(&mut self, timer: HostTimer, now: SimTime) -> HostActions {
        match self {
            Host::Legit(c) => c.on_timer(timer, now),
            Host::Attacker(a) => a.on_timer(timer, now),
        }
    }

    pub fn on_packet(&mut self, p: &Packet, now: SimTime) -> HostActions {
        match self {
            Host::Legit(c) => c.on_packet(p, now),
            Host::Attacker(a) => a.on_packet(p, now),
        }
    }
}
