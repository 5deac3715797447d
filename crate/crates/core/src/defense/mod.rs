//! Router-side defense: congestion signatures at the detecting router,
//! pushback to the upstream neighbour, puzzle validation of suspects and
//! blocking at their edge routers.

pub mod difficulty;
pub mod puzzle;
pub mod router;
pub mod signature;

use std::collections::BTreeMap;

use crate::engine::{Prng, SimTime};
use crate::netmodel::{
    BlockMsg, Body, ChallengeMsg, Direction, FilterVerdict, LinkId, Network, NodeId, NodeKind, Packet, PacketDraft,
    PacketFilter, PushbackMsg, RouterRole, TallyConfig, WindowStats,
};

pub use difficulty::{ChallengeOutcome, DifficultyController};
pub use puzzle::{puzzle_digest, solve_minimal, verify_solution, PuzzleChallenge, MAX_DIFFICULTY_BITS};
pub use router::{Admission, BlockEntry, RateLimitEntry, RouterDefense, Verdict};
pub use signature::{
    drop_fraction, is_congested, observe_window, rank_suspects, CongestionSignature, DetectionParams, Detector,
    SignatureState, Suspect,
};

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseConfig {
    pub enabled: bool,
    pub detection: DetectionParams,
    pub window: TallyConfig,
    pub puzzle_timeout: SimTime,
    pub initial_difficulty: u32,
    pub min_difficulty: u32,
    pub max_difficulty: u32,
    pub whitelist_ttl: SimTime,
    pub block_ttl: SimTime,
    pub admit_fraction: f64,
    /// Minimum spacing between pushbacks naming the same suspect.
    pub repush_interval: SimTime,
    /// How long a pushback request keeps a router's congestion flag raised.
    pub congestion_hold: SimTime,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            enabled: true,
            detection: DetectionParams::default(),
            window: TallyConfig::default(),
            puzzle_timeout: SimTime::from_secs(2),
            initial_difficulty: 8,
            min_difficulty: 0,
            max_difficulty: MAX_DIFFICULTY_BITS,
            whitelist_ttl: SimTime::from_secs(60),
            block_ttl: SimTime::from_secs(60),
            admit_fraction: 0.1,
            repush_interval: SimTime::from_secs(1),
            congestion_hold: SimTime::from_secs(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeadlineTimer {
    pub router: NodeId,
    pub host: NodeId,
    pub challenge_id: u64,
    pub at: SimTime,
}

/// Work the simulation must carry out on the defense's behalf.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Actions {
    pub sends: Vec<PacketDraft>,
    pub deadlines: Vec<DeadlineTimer>,
}

impl Actions {
    fn extend(&mut self, other: Actions) {
        self.sends.extend(other.sends);
        self.deadlines.extend(other.deadlines);
    }

    pub fn is_empty(&self) -> bool {
        self.sends.is_empty() && self.deadlines.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DefenseCounters {
    pub puzzles_issued: u64,
    pub puzzles_solved: u64,
    pub puzzles_failed: u64,
    pub pushback_reqs: u64,
    pub block_reqs: u64,
    pub unreachable_suspects: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockInstall {
    pub router: NodeId,
    pub src: NodeId,
    pub at: SimTime,
}

/// A detecting router and the link it watches.
#[derive(Debug, Clone)]
pub struct Sentinel {
    pub router: NodeId,
    pub link: LinkId,
    pub dir: Direction,
    pub detector: Detector,
}

#[derive(Debug, Clone)]
pub struct DefensePlane {
    pub cfg: DefenseConfig,
    routers: BTreeMap<NodeId, RouterDefense>,
    sentinels: Vec<Sentinel>,
    pub counters: DefenseCounters,
    pub block_log: Vec<BlockInstall>,
}

impl DefensePlane {
    pub fn new(cfg: DefenseConfig, net: &Network) -> Self {
        let mut routers = BTreeMap::new();
        let mut sentinels = Vec::new();
        let victim = net.server();
        for node in net.nodes() {
            let NodeKind::Router(role) = node.kind else { continue };
            routers.insert(
                node.id,
                RouterDefense::new(
                    node.id,
                    DifficultyController::new(cfg.initial_difficulty, cfg.min_difficulty, cfg.max_difficulty),
                ),
            );
            if cfg.enabled && role == RouterRole::Intelligent {
                let toward = net.next_hop(node.id, victim).expect("topology validated as connected");
                let (link, dir) = net.link_between(node.id, toward).expect("next hop is adjacent");
                sentinels.push(Sentinel {
                    router: node.id,
                    link,
                    dir,
                    detector: Detector::new(victim, cfg.detection),
                });
            }
        }
        DefensePlane {
            cfg,
            routers,
            sentinels,
            counters: DefenseCounters::default(),
            block_log: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.cfg.enabled
    }

    pub fn router(&self, id: NodeId) -> Option<&RouterDefense> {
        self.routers.get(&id)
    }

    pub fn routers(&self) -> impl Iterator<Item = &RouterDefense> {
        self.routers.values()
    }

    pub fn sentinels(&self) -> &[Sentinel] {
        &self.sentinels
    }

    pub fn signatures_created(&self) -> u64 {
        self.sentinels
            .iter()
            .map(|s| s.detector.signatures_created() as u64)
            .sum()
    }

    pub fn active_blocks(&self, now: SimTime) -> usize {
        self.routers.values().map(|r| r.active_blocks(now)).sum()
    }

    /// Highest difficulty any router currently issues.
    pub fn difficulty_bits(&self) -> u32 {
        self.routers
            .values()
            .map(|r| r.difficulty.current_bits())
            .max()
            .unwrap_or(self.cfg.initial_difficulty)
    }

    pub fn filter<'a>(&'a mut self, prng: &'a mut Prng) -> DefenseFilter<'a> {
        DefenseFilter { plane: self, prng }
    }

    fn congestion_active(&self, router: NodeId, now: SimTime) -> bool {
        let recent = self.routers[&router]
            .last_pushback_rx
            .is_some_and(|t| now < t.saturating_add(self.cfg.congestion_hold));
        recent
            || self
                .sentinels
                .iter()
                .any(|s| s.router == router && s.detector.live_signature().is_some())
    }

    /// Periodic observation at sentinel `idx`: update or create its
    /// signature and push suspects upstream.
    pub fn observe(&mut self, idx: usize, net: &Network, now: SimTime, prng: &mut Prng) -> (WindowStats, Actions) {
        let s = &mut self.sentinels[idx];
        let stats = observe_window(&net.link(s.link).dir(s.dir).tally, now);
        let was_live = s.detector.live_signature().is_some();
        if s.detector.update_signature(&stats) == Some(SignatureState::Resolved) && was_live {
            let (router, victim) = (s.router, s.detector.victim);
            self.routers
                .get_mut(&router)
                .expect("sentinel is a router")
                .rate_limits
                .retain(|_, rl| rl.victim != victim);
        }
        let s = &mut self.sentinels[idx];
        let mut actions = Actions::default();
        if s.detector.detect(&stats, now).is_some() {
            actions = self.initiate_pushback(idx, net, now, prng);
        }
        (stats, actions)
    }

    /// Rate-limit each due suspect locally and ask the next router toward it
    /// to validate it. Suspects sharing that neighbour share one request.
    pub fn initiate_pushback(&mut self, idx: usize, net: &Network, now: SimTime, prng: &mut Prng) -> Actions {
        let repush = self.cfg.repush_interval;
        let admit = self.cfg.admit_fraction;
        let s = &mut self.sentinels[idx];
        let me = s.router;
        let Some(sig) = s.detector.signature_mut().filter(|sig| sig.is_live()) else {
            return Actions::default();
        };
        let due: Vec<NodeId> = sig
            .suspects
            .iter()
            .map(|x| x.src)
            .filter(|src| sig.pushed_at.get(src).is_none_or(|t| now.saturating_sub(*t) >= repush))
            .collect();
        let (sig_id, victim) = (sig.sig_id, sig.victim);
        let mut groups: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        let mut direct = Vec::new();
        for src in due {
            match net.next_hop(me, src) {
                None => {
                    self.counters.unreachable_suspects += 1;
                    continue;
                }
                Some(hop) if hop == src => direct.push(src),
                Some(hop) if net.node(hop).kind.is_router() => groups.entry(hop).or_default().push(src),
                Some(_) => {
                    self.counters.unreachable_suspects += 1;
                    continue;
                }
            }
            sig.pushed_at.insert(src, now);
        }
        sig.state = SignatureState::Pushed;

        let mut actions = Actions::default();
        let local = self.routers.get_mut(&me).expect("sentinel is a router");
        for src in groups.values().flatten().chain(direct.iter()) {
            if !local.is_whitelisted(*src, now) {
                local.install_rate_limit(*src, victim, admit, now);
            }
        }
        for (hop, suspects) in groups {
            self.counters.pushback_reqs += 1;
            actions.sends.push(PacketDraft::new(
                me,
                hop,
                0,
                Body::PushbackRequest(PushbackMsg {
                    sig_id,
                    victim,
                    suspects,
                }),
            ));
        }
        if !direct.is_empty() {
            let msg = PushbackMsg {
                sig_id,
                victim,
                suspects: direct,
            };
            actions.extend(self.on_pushback_req(me, &msg, now, prng));
        }
        actions
    }

    /// Challenge every listed suspect not already challenged or whitelisted
    /// here, and rate-limit it meanwhile.
    pub fn on_pushback_req(&mut self, me: NodeId, msg: &PushbackMsg, now: SimTime, prng: &mut Prng) -> Actions {
        let timeout = self.cfg.puzzle_timeout;
        let admit = self.cfg.admit_fraction;
        let Some(r) = self.routers.get_mut(&me) else {
            return Actions::default();
        };
        r.last_pushback_rx = Some(now);
        let mut actions = Actions::default();
        for &host in &msg.suspects {
            if r.is_whitelisted(host, now) {
                continue;
            }
            r.install_rate_limit(host, msg.victim, admit, now);
            if let Some(ch) = r.issue_challenge(host, now, timeout, prng) {
                debug_assert_eq!(r.outstanding.values().filter(|c| c.issued_to == host).count(), 1);
                self.counters.puzzles_issued += 1;
                actions.deadlines.push(DeadlineTimer {
                    router: me,
                    host,
                    challenge_id: ch.challenge_id,
                    at: ch.deadline,
                });
                actions.sends.push(PacketDraft::new(
                    me,
                    host,
                    0,
                    Body::PuzzleChallenge(ChallengeMsg {
                        challenge_id: ch.challenge_id,
                        difficulty_bits: ch.difficulty_bits,
                        issued_by: me,
                        deadline: ch.deadline,
                    }),
                ));
            }
        }
        actions
    }

    pub fn on_puzzle_response(
        &mut self,
        me: NodeId,
        host: NodeId,
        challenge_id: u64,
        nonce: u64,
        now: SimTime,
        net: &Network,
    ) -> Actions {
        let congested = self.congestion_active(me, now);
        let whitelist_ttl = self.cfg.whitelist_ttl;
        let Some(r) = self.routers.get_mut(&me) else {
            return Actions::default();
        };
        let verdict = r.on_response(host, challenge_id, nonce, now, whitelist_ttl, congested);
        self.settle(me, verdict, now, net)
    }

    pub fn on_puzzle_timeout(&mut self, timer: DeadlineTimer, now: SimTime, net: &Network) -> Actions {
        let congested = self.congestion_active(timer.router, now);
        let Some(r) = self.routers.get_mut(&timer.router) else {
            return Actions::default();
        };
        let verdict = r.on_timeout(timer.host, timer.challenge_id, congested);
        self.settle(timer.router, verdict, now, net)
    }

    fn settle(&mut self, me: NodeId, verdict: Option<Verdict>, now: SimTime, net: &Network) -> Actions {
        let mut actions = Actions::default();
        match verdict {
            None => {}
            Some(Verdict::Validated { .. }) => self.counters.puzzles_solved += 1,
            Some(Verdict::Confirmed { host }) => {
                self.counters.puzzles_failed += 1;
                self.counters.block_reqs += 1;
                let edge = net.edge_router(host).expect("suspects are hosts with an edge router");
                let ttl = self.cfg.block_ttl;
                self.routers.get_mut(&me).expect("router").rate_limits.remove(&host);
                for s in self.sentinels.iter_mut().filter(|s| s.router == me) {
                    if let Some(sig) = s.detector.signature_mut() {
                        sig.remove_suspect(host);
                    }
                }
                if edge == me {
                    self.install_block(me, host, ttl, now);
                } else {
                    actions.sends.push(PacketDraft::new(
                        me,
                        edge,
                        0,
                        Body::BlockRequest(BlockMsg { suspect: host, ttl }),
                    ));
                }
            }
        }
        actions
    }

    pub fn on_block_req(&mut self, me: NodeId, msg: &BlockMsg, now: SimTime) {
        self.install_block(me, msg.suspect, msg.ttl, now);
    }

    fn install_block(&mut self, router: NodeId, src: NodeId, ttl: SimTime, now: SimTime) {
        if let Some(r) = self.routers.get_mut(&router) {
            r.install_block(src, now, ttl);
            self.block_log.push(BlockInstall { router, src, at: now });
        }
    }
}

/// Applies a router's installed blocks and rate limits while forwarding.
pub struct DefenseFilter<'a> {
    plane: &'a mut DefensePlane,
    prng: &'a mut Prng,
}

impl PacketFilter for DefenseFilter<'_> {
    fn verdict(&mut self, router: NodeId, p: &Packet, now: SimTime) -> FilterVerdict {
        if !self.plane.cfg.enabled {
            return FilterVerdict::Pass;
        }
        match self.plane.routers.get(&router) {
            Some(r) => r.filter(p, now, self.prng),
            None => FilterVerdict::Pass,
        }
    }
}
