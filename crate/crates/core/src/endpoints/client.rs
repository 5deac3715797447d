use std::collections::BTreeMap;

use crate::engine::SimTime;
use crate::netmodel::{Body, NodeId, Packet, PacketDraft};

use super::{HostActions, HostTimer, PuzzleSolver};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientConfig {
    pub attempt_rate_cps: f64,
    pub rto_initial: SimTime,
    pub rto_max: SimTime,
    pub max_retries: u32,
    pub cooldown: SimTime,
    pub start: SimTime,
    pub stop: Option<SimTime>,
    pub hash_cost: SimTime,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            attempt_rate_cps: 2.0,
            rto_initial: SimTime::from_secs(1),
            rto_max: SimTime::from_secs(32),
            max_retries: 5,
            cooldown: SimTime::from_secs(5),
            start: SimTime::ZERO,
            stop: None,
            hash_cost: SimTime::from_micros(1),
        }
    }
}

impl ClientConfig {
    /// Spacing between attempts, or `None` for a silent client.
    pub fn period(&self) -> Option<SimTime> {
        (self.attempt_rate_cps > 0.0)
            .then(|| SimTime::from_nanos((1e9 / self.attempt_rate_cps).round().max(1.0) as u64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingAttempt {
    pub first_sent_at: SimTime,
    pub retries: u32,
    pub rto: SimTime,
}

/// A client that opens connections at a fixed rate, backs off on loss and
/// pays for puzzles it is sent. While any attempt is retransmitting it opens
/// no new ones.
#[derive(Debug, Clone)]
pub struct LegitClient {
    pub id: NodeId,
    pub server: NodeId,
    pub cfg: ClientConfig,
    next_flow: u32,
    pub pending: BTreeMap<u32, PendingAttempt>,
    pub completed: u64,
    pub abandoned: u64,
    pub attempts: u64,
    pub cooldown_until: Option<SimTime>,
    pub solver: PuzzleSolver,
    deferred: Vec<PacketDraft>,
}

impl LegitClient {
    pub fn new(id: NodeId, server: NodeId, cfg: ClientConfig) -> Self {
        LegitClient {
            id,
            server,
            cfg,
            next_flow: 1,
            pending: BTreeMap::new(),
            completed: 0,
            abandoned: 0,
            attempts: 0,
            cooldown_until: None,
            solver: PuzzleSolver::new(cfg.hash_cost),
            deferred: Vec::new(),
        }
    }

    pub fn first_tick(&self) -> Option<SimTime> {
        self.cfg
            .period()
            .map(|_| self.cfg.start)
            .filter(|t| self.cfg.stop.is_none_or(|s| *t < s))
    }

    fn syn(&self, flow_tag: u32) -> PacketDraft {
        PacketDraft::new(self.id, self.server, flow_tag, Body::Syn)
    }

    fn send(&mut self, out: &mut HostActions, d: PacketDraft) {
        if self.solver.is_solving() {
            self.deferred.push(d);
        } else {
            out.sends.push(d);
        }
    }

    pub fn on_timer(&mut self, timer: HostTimer, now: SimTime) -> HostActions {
        let mut out = HostActions::default();
        match timer {
            HostTimer::Tick => {
                let period = self.cfg.period().expect("ticks only run with a positive rate");
                let next = now + period;
                if self.cfg.stop.is_none_or(|s| next < s) {
                    out.timers.push((next, HostTimer::Tick));
                }
                let cooling = self.cooldown_until.is_some_and(|t| now < t);
                let backing_off = self.pending.values().any(|a| a.retries > 0);
                if !cooling && !backing_off && !self.solver.is_solving() {
                    let flow = self.next_flow;
                    self.next_flow += 1;
                    self.attempts += 1;
                    self.pending.insert(
                        flow,
                        PendingAttempt {
                            first_sent_at: now,
                            retries: 0,
                            rto: self.cfg.rto_initial,
                        },
                    );
                    out.sends.push(self.syn(flow));
                    out.timers.push((
                        now + self.cfg.rto_initial,
                        HostTimer::Rto {
                            flow_tag: flow,
                            retries: 0,
                        },
                    ));
                }
            }
            HostTimer::Rto { flow_tag, retries } => {
                let Some(att) = self.pending.get_mut(&flow_tag).filter(|a| a.retries == retries) else {
                    return out;
                };
                if let Some(until) = self.solver.solving_until() {
                    out.timers.push((until, timer));
                    return out;
                }
                if att.retries >= self.cfg.max_retries {
                    self.pending.remove(&flow_tag);
                    self.abandoned += 1;
                    self.cooldown_until = Some(now + self.cfg.cooldown);
                } else {
                    att.retries += 1;
                    att.rto = (att.rto + att.rto).min(self.cfg.rto_max);
                    let (r, rto) = (att.retries, att.rto);
                    out.sends.push(self.syn(flow_tag));
                    out.timers.push((now + rto, HostTimer::Rto { flow_tag, retries: r }));
                }
            }
            HostTimer::SolveDone { .. } => {
                self.solver.on_done(self.id, timer, now, &mut out);
                if !self.solver.is_solving() {
                    out.sends.append(&mut self.deferred);
                }
            }
        }
        out
    }

    pub fn on_packet(&mut self, p: &Packet, now: SimTime) -> HostActions {
        let mut out = HostActions::default();
        match &p.body {
            Body::SynAck if p.src == self.server => {
                if self.pending.remove(&p.flow_tag).is_some() {
                    self.completed += 1;
                    self.send(&mut out, PacketDraft::new(self.id, self.server, p.flow_tag, Body::Ack));
                    self.send(&mut out, PacketDraft::new(self.id, self.server, p.flow_tag, Body::Data));
                }
            }
            Body::PuzzleChallenge(ch) => {
                if let Some(t) = self.solver.on_challenge(ch, now) {
                    out.timers.push(t);
                }
            }
            _ => {}
        }
        out
    }
}
