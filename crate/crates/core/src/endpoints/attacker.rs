use crate::engine::SimTime;
use crate::netmodel::{Body, NodeId, Packet, PacketDraft};

use super::{HostActions, HostTimer, PuzzleSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    SynFlood,
    UdpFlood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackerConfig {
    pub rate_pps: u32,
    pub mode: AttackMode,
    /// Solves puzzles instead of ignoring them.
    pub smart: bool,
    pub start: SimTime,
    pub stop: Option<SimTime>,
    pub hash_cost: SimTime,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        AttackerConfig {
            rate_pps: 500,
            mode: AttackMode::SynFlood,
            smart: false,
            start: SimTime::ZERO,
            stop: None,
            hash_cost: SimTime::from_micros(1),
        }
    }
}

impl AttackerConfig {
    pub fn period(&self) -> Option<SimTime> {
        (self.rate_pps > 0).then(|| SimTime::from_nanos(1_000_000_000 / self.rate_pps as u64))
    }
}

/// Emits at a fixed period whatever the network does. Never completes a
/// handshake.
#[derive(Debug, Clone)]
pub struct Attacker {
    pub id: NodeId,
    pub server: NodeId,
    pub cfg: AttackerConfig,
    next_flow: u32,
    pub emitted: u64,
    pub solver: PuzzleSolver,
}

impl Attacker {
    pub fn new(id: NodeId, server: NodeId, cfg: AttackerConfig) -> Self {
        Attacker {
            id,
            server,
            cfg,
            next_flow: 1,
            emitted: 0,
            solver: PuzzleSolver::new(cfg.hash_cost),
        }
    }

    pub fn first_tick(&self) -> Option<SimTime> {
        self.cfg
            .period()
            .map(|_| self.cfg.start)
            .filter(|t| self.cfg.stop.is_none_or(|s| *t < s))
    }

    pub fn on_timer(&mut self, timer: HostTimer, now: SimTime) -> HostActions {
        let mut out = HostActions::default();
        match timer {
            HostTimer::Tick => {
                let next = now + self.cfg.period().expect("ticks only run with a positive rate");
                if self.cfg.stop.is_none_or(|s| next < s) {
                    out.timers.push((next, HostTimer::Tick));
                }
                if !self.solver.is_solving() {
                    let flow = self.next_flow;
                    self.next_flow = self.next_flow.wrapping_add(1);
                    self.emitted += 1;
                    let body = match self.cfg.mode {
                        AttackMode::SynFlood => Body::Syn,
                        AttackMode::UdpFlood => Body::Udp,
                    };
                    out.sends.push(PacketDraft::new(self.id, self.server, flow, body));
                }
            }
            HostTimer::SolveDone { .. } => self.solver.on_done(self.id, timer, now, &mut out),
            HostTimer::Rto { .. } => {}
        }
        out
    }

    pub fn on_packet(&mut self, p: &Packet, now: SimTime) -> HostActions {
        let mut out = HostActions::default();
        if let Body::PuzzleChallenge(ch) = &p.body {
            if self.cfg.smart {
                if let Some(t) = self.solver.on_challenge(ch, now) {
                    out.timers.push(t);
                }
            }
        }
        out
    }
}
