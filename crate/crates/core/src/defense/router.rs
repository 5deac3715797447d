//! Per-router defense state: filters, outstanding puzzles and whitelist.

use std::collections::BTreeMap;

use crate::engine::{Prng, SimTime};
use crate::netmodel::{FilterVerdict, NodeId, Packet};

use super::difficulty::{ChallengeOutcome, DifficultyController};
use super::puzzle::{verify_solution, PuzzleChallenge};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockEntry {
    pub src: NodeId,
    pub installed_at: SimTime,
    pub ttl: SimTime,
}

impl BlockEntry {
    pub fn is_active(&self, now: SimTime) -> bool {
        now <= self.installed_at.saturating_add(self.ttl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admit,
    Drop,
}

/// Probabilistic admission for an unvalidated suspect's traffic toward a
/// victim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLimitEntry {
    pub src: NodeId,
    pub victim: NodeId,
    admit_fraction: f64,
    pub since: SimTime,
}

impl RateLimitEntry {
    /// `None` unless `0 < admit_fraction <= 1`.
    pub fn new(src: NodeId, victim: NodeId, admit_fraction: f64, since: SimTime) -> Option<Self> {
        (admit_fraction > 0.0 && admit_fraction <= 1.0).then_some(RateLimitEntry {
            src,
            victim,
            admit_fraction,
            since,
        })
    }

    pub fn admit_fraction(&self) -> f64 {
        self.admit_fraction
    }

    pub fn matches(&self, p: &Packet) -> bool {
        p.src == self.src && p.dst == self.victim && !p.kind().is_defense_plane()
    }

    /// Draw `u` in `[0, 1)`; admit iff `u < admit_fraction`.
    pub fn admit(&self, prng: &mut Prng) -> Admission {
        if prng.next_unit() < self.admit_fraction {
            Admission::Admit
        } else {
            Admission::Drop
        }
    }
}

/// How a challenge ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Validated { host: NodeId },
    Confirmed { host: NodeId },
}

#[derive(Debug, Clone)]
pub struct RouterDefense {
    pub id: NodeId,
    pub blocks: BTreeMap<NodeId, BlockEntry>,
    pub rate_limits: BTreeMap<NodeId, RateLimitEntry>,
    pub whitelist: BTreeMap<NodeId, SimTime>,
    pub outstanding: BTreeMap<NodeId, PuzzleChallenge>,
    pub difficulty: DifficultyController,
    pub last_pushback_rx: Option<SimTime>,
}

impl RouterDefense {
    pub fn new(id: NodeId, difficulty: DifficultyController) -> Self {
        RouterDefense {
            id,
            blocks: BTreeMap::new(),
            rate_limits: BTreeMap::new(),
            whitelist: BTreeMap::new(),
            outstanding: BTreeMap::new(),
            difficulty,
            last_pushback_rx: None,
        }
    }

    pub fn is_whitelisted(&self, host: NodeId, now: SimTime) -> bool {
        self.whitelist.get(&host).is_some_and(|until| now < *until)
    }

    pub fn is_blocked(&self, src: NodeId, now: SimTime) -> bool {
        self.blocks.get(&src).is_some_and(|b| b.is_active(now))
    }

    pub fn active_blocks(&self, now: SimTime) -> usize {
        self.blocks.values().filter(|b| b.is_active(now)).count()
    }

    pub fn install_block(&mut self, src: NodeId, now: SimTime, ttl: SimTime) {
        self.blocks.insert(
            src,
            BlockEntry {
                src,
                installed_at: now,
                ttl,
            },
        );
        self.rate_limits.remove(&src);
    }

    pub fn install_rate_limit(&mut self, src: NodeId, victim: NodeId, admit_fraction: f64, now: SimTime) {
        if let Some(entry) = RateLimitEntry::new(src, victim, admit_fraction, now) {
            self.rate_limits.entry(src).or_insert(entry);
        }
    }

    /// Block check, then rate limiting. Defense-plane packets always pass so
    /// a wrongly blocked host can still answer a puzzle.
    pub fn filter(&self, p: &Packet, now: SimTime, prng: &mut Prng) -> FilterVerdict {
        if p.kind().is_defense_plane() {
            return FilterVerdict::Pass;
        }
        if self.is_blocked(p.src, now) {
            return FilterVerdict::Block;
        }
        match self.rate_limits.get(&p.src) {
            Some(rl) if rl.matches(p) && !self.is_whitelisted(p.src, now) => match rl.admit(prng) {
                Admission::Admit => FilterVerdict::Pass,
                Admission::Drop => FilterVerdict::RateLimit,
            },
            _ => FilterVerdict::Pass,
        }
    }

    /// Open a challenge for `host` unless one is outstanding or the host is
    /// whitelisted here.
    pub fn issue_challenge(
        &mut self,
        host: NodeId,
        now: SimTime,
        timeout: SimTime,
        prng: &mut Prng,
    ) -> Option<PuzzleChallenge> {
        if self.outstanding.contains_key(&host) || self.is_whitelisted(host, now) {
            return None;
        }
        let ch = PuzzleChallenge {
            challenge_id: prng.next_u64(),
            difficulty_bits: self.difficulty.current_bits(),
            issued_to: host,
            issued_by: self.id,
            issued_at: now,
            deadline: now + timeout,
        };
        self.outstanding.insert(host, ch.clone());
        Some(ch)
    }

    /// A response from `host`. Stale or unknown responses yield `None`.
    pub fn on_response(
        &mut self,
        host: NodeId,
        challenge_id: u64,
        nonce: u64,
        now: SimTime,
        whitelist_ttl: SimTime,
        congestion_active: bool,
    ) -> Option<Verdict> {
        let ch = self.outstanding.get(&host)?;
        if ch.challenge_id != challenge_id || now >= ch.deadline {
            return None;
        }
        let ok = verify_solution(ch.challenge_id, ch.difficulty_bits, nonce);
        self.outstanding.remove(&host);
        if ok {
            self.whitelist.insert(host, now + whitelist_ttl);
            self.rate_limits.remove(&host);
            self.difficulty
                .record(ChallengeOutcome::SolvedInTime, congestion_active);
            Some(Verdict::Validated { host })
        } else {
            self.difficulty.record(ChallengeOutcome::Failed, congestion_active);
            Some(Verdict::Confirmed { host })
        }
    }

    /// Deadline timer for a challenge. `None` if it was already answered.
    pub fn on_timeout(&mut self, host: NodeId, challenge_id: u64, congestion_active: bool) -> Option<Verdict> {
        match self.outstanding.get(&host) {
            Some(ch) if ch.challenge_id == challenge_id => {
                self.outstanding.remove(&host);
                self.difficulty.record(ChallengeOutcome::Failed, congestion_active);
                Some(Verdict::Confirmed { host })
            }
            _ => None,
        }
    }
}
