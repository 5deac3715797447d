//! Runs a validated scenario: builds the network and endpoints, drives the
//! engine and collects samples and run statistics.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::defense::{Actions, DeadlineTimer, DefenseCounters, DefensePlane};
use crate::endpoints::{Attacker, Host, HostActions, HostTimer, LegitClient, ServerConnTable, ServerCounters};
use crate::engine::{Engine, Event, SimTime};
use crate::metrics::{IntervalCounters, MetricsRecorder, SampleRow, Snapshot};
use crate::netmodel::{
    Body, Direction, ForwardOutcome, HostRole, LinkId, NetError, Network, NodeId, NodeKind, Packet, PacketDraft,
    PacketFactory,
};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("invariant violated at {at}: {what}")]
    Invariant { at: SimTime, what: String },
}

#[derive(Debug, Clone)]
pub enum Ev {
    Host(HostTimer),
    TxComplete { link: LinkId, dir: Direction },
    Deliver(Packet),
    ExpireHalfOpen,
    Observe(usize),
    PuzzleDeadline(DeadlineTimer),
    Sample,
}

/// Traffic class of a packet's true sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Class {
    Legit,
    Attack,
    Infra,
}

impl Class {
    pub fn of(kind: NodeKind) -> Class {
        match kind {
            NodeKind::Host(HostRole::Legitimate) => Class::Legit,
            NodeKind::Host(HostRole::Attacker) => Class::Attack,
            _ => Class::Infra,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Attacker-originated packets discarded by a block entry.
    pub blocked_pkts: u64,
    pub filtered_by_class: BTreeMap<Class, u64>,
    pub rate_limited_by_class: BTreeMap<Class, u64>,
    /// Packets and bytes delivered to the server, by class.
    pub victim_pkts: BTreeMap<Class, u64>,
    pub victim_bytes: BTreeMap<Class, u64>,
    /// Latest delivery to the server, by class.
    pub last_victim_arrival: BTreeMap<Class, SimTime>,
    /// Bytes transmitted onto the server's access link and still propagating.
    pub victim_inflight_bytes: BTreeMap<Class, u64>,
    /// Last time each host's edge router relayed one of its packets.
    pub last_relayed_by_edge: BTreeMap<NodeId, SimTime>,
    /// Largest backlog occupancy seen after any server event.
    pub max_backlog: usize,
    pub events: u64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<SampleRow>,
    /// Metric counts over the whole run, including after the last sample.
    pub totals: IntervalCounters,
    pub stats: RunStats,
    pub server: ServerCounters,
    pub first_backlog_full: Option<SimTime>,
    pub backlog_capacity: usize,
    pub defense: DefenseCounters,
    pub signatures: u64,
    pub block_log: Vec<crate::defense::BlockInstall>,
    pub completed: u64,
    pub completed_by_host: BTreeMap<NodeId, u64>,
    pub attack_emitted: u64,
    pub links_conserve: bool,
    pub trace_digest: u64,
    pub net: Network,
}

impl RunReport {
    pub fn summary_line(&self) -> String {
        format!(
            "summary completed={} blocked_pkts={} signatures={} puzzles={}/{}/{}",
            self.completed,
            self.stats.blocked_pkts,
            self.signatures,
            self.defense.puzzles_issued,
            self.defense.puzzles_solved,
            self.defense.puzzles_failed
        )
    }
}

struct World {
    net: Network,
    factory: PacketFactory,
    hosts: BTreeMap<NodeId, Host>,
    server: ServerConnTable,
    defense: DefensePlane,
    metrics: MetricsRecorder,
    stats: RunStats,
    classes: Vec<Class>,
    sample_interval: SimTime,
    observe_interval: SimTime,
    duration: SimTime,
}

pub struct Simulation {
    engine: Engine<Ev>,
    world: World,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, crate::scenario::ConfigError> {
        let net = cfg.network()?;
        let server_id = net.server();
        let classes = net.nodes().iter().map(|n| Class::of(n.kind)).collect();
        let mut hosts = BTreeMap::new();
        let mut server = None;
        for (n, node) in cfg.nodes.iter().zip(net.nodes()) {
            match node.kind {
                NodeKind::Host(HostRole::Legitimate) => {
                    hosts.insert(
                        node.id,
                        Host::Legit(LegitClient::new(node.id, server_id, n.client_config())),
                    );
                }
                NodeKind::Host(HostRole::Attacker) => {
                    hosts.insert(
                        node.id,
                        Host::Attacker(Attacker::new(node.id, server_id, n.attacker_config())),
                    );
                }
                NodeKind::Server => server = Some(ServerConnTable::new(node.id, n.server_config())),
                NodeKind::Router(_) => {}
            }
        }
        let defense = DefensePlane::new(cfg.defense_config(), &net);
        let mut engine = Engine::new(cfg.run.seed);
        let server = server.expect("validated topology has a server");

        for (id, h) in &hosts {
            if let Some(t) = h.first_tick() {
                engine.schedule(t, *id, Ev::Host(HostTimer::Tick));
            }
        }
        engine.schedule(server.cfg.expiry_interval, server_id, Ev::ExpireHalfOpen);
        for (i, s) in defense.sentinels().iter().enumerate() {
            engine.schedule(cfg.observe_interval(), s.router, Ev::Observe(i));
        }
        engine.schedule(cfg.sample_interval(), server_id, Ev::Sample);

        Ok(Simulation {
            engine,
            world: World {
                net,
                factory: PacketFactory::new(cfg.sizes()),
                hosts,
                server,
                defense,
                metrics: MetricsRecorder::new(cfg.sample_interval()),
                stats: RunStats::default(),
                classes,
                sample_interval: cfg.sample_interval(),
                observe_interval: cfg.observe_interval(),
                duration: cfg.duration(),
            },
        })
    }

    pub fn network(&self) -> &Network {
        &self.world.net
    }

    /// Advance to `t` (bounded by the scenario duration). Returns the clock.
    pub fn step_until(&mut self, t: SimTime) -> Result<SimTime, SimError> {
        let end = t.min(self.world.duration);
        let world = &mut self.world;
        let n = self.engine.try_run_until(end, |eng, ev| world.handle(eng, ev))?;
        world.stats.events += n;
        Ok(self.engine.now())
    }

    pub fn run(mut self) -> Result<RunReport, SimError> {
        let end = self.world.duration;
        self.step_until(end)?;
        Ok(self.finish())
    }

    pub fn finish(self) -> RunReport {
        let w = self.world;
        let mut completed_by_host = BTreeMap::new();
        let mut attack_emitted = 0;
        for (id, h) in &w.hosts {
            match h {
                Host::Legit(c) => {
                    completed_by_host.insert(*id, c.completed);
                }
                Host::Attacker(a) => attack_emitted += a.emitted,
            }
        }
        RunReport {
            completed: completed_by_host.values().sum(),
            completed_by_host,
            attack_emitted,
            totals: w.metrics.totals(),
            rows: w.metrics.into_rows(),
            stats: w.stats,
            server: w.server.counters,
            first_backlog_full: w.server.first_full_at,
            backlog_capacity: w.server.cfg.backlog_capacity,
            defense: w.defense.counters,
            signatures: w.defense.signatures_created(),
            block_log: w.defense.block_log.clone(),
            links_conserve: w.net.conserves(),
            trace_digest: self.engine.trace_digest(),
            net: w.net,
        }
    }
}

/// Parse-free entry point: run a validated scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport, SimError> {
    Simulation::new(cfg)
        .map_err(|e| SimError::Invariant {
            at: SimTime::ZERO,
            what: e.to_string(),
        })?
        .run()
}

impl World {
    fn class(&self, id: NodeId) -> Class {
        self.classes[id.index()]
    }

    fn handle(&mut self, eng: &mut Engine<Ev>, ev: Event<Ev>) -> Result<(), SimError> {
        let now = ev.fire_at;
        let at = ev.target;
        match ev.payload {
            Ev::Host(timer) => {
                let host = self.hosts.get_mut(&at).expect("host timer targets a host");
                let before = completed(host);
                let actions = host.on_timer(timer, now);
                self.metrics.current.completed += completed(host) - before;
                self.host_actions(eng, at, actions)?;
            }
            Ev::TxComplete { link, dir } => {
                let l = self.net.link_mut(link);
                let p = l.complete_transmission(dir);
                let (to, delay) = (l.receiver(dir), l.prop_delay);
                if to == self.server.id {
                    *self.stats.victim_inflight_bytes.entry(self.class(p.src)).or_default() += p.size_bytes as u64;
                }
                eng.schedule(now + delay, to, Ev::Deliver(p));
            }
            Ev::Deliver(p) => self.deliver(eng, at, p)?,
            Ev::ExpireHalfOpen => {
                self.server.expire(now);
                eng.schedule(now + self.server.cfg.expiry_interval, at, Ev::ExpireHalfOpen);
            }
            Ev::Observe(idx) => {
                let (_, actions) = self.defense.observe(idx, &self.net, now, eng.prng());
                self.defense_actions(eng, actions)?;
                eng.schedule(now + self.observe_interval, at, Ev::Observe(idx));
            }
            Ev::PuzzleDeadline(t) => {
                let actions = self.defense.on_puzzle_timeout(t, now, &self.net);
                self.defense_actions(eng, actions)?;
            }
            Ev::Sample => {
                let snap = Snapshot {
                    backlog_occupancy: self.server.occupancy() as u64,
                    active_blocks: self.defense.active_blocks(now) as u64,
                    puzzles_issued: self.defense.counters.puzzles_issued,
                    puzzles_solved: self.defense.counters.puzzles_solved,
                    puzzles_failed: self.defense.counters.puzzles_failed,
                    difficulty_bits: self.defense.difficulty_bits(),
                };
                self.metrics.sample(now, snap);
                eng.schedule(now + self.sample_interval, at, Ev::Sample);
            }
        }
        Ok(())
    }

    fn deliver(&mut self, eng: &mut Engine<Ev>, at: NodeId, p: Packet) -> Result<(), SimError> {
        let now = eng.now();
        if p.dst != at {
            return self.relay(eng, at, p);
        }
        match self.net.node(at).kind {
            NodeKind::Server => {
                let class = self.class(p.src);
                let bytes = p.size_bytes as u64;
                if let Some(b) = self.stats.victim_inflight_bytes.get_mut(&class) {
                    *b -= bytes;
                }
                *self.stats.victim_pkts.entry(class).or_default() += 1;
                *self.stats.victim_bytes.entry(class).or_default() += bytes;
                self.stats.last_victim_arrival.insert(class, now);
                match class {
                    Class::Legit => self.metrics.current.victim_bytes_legit += bytes,
                    Class::Attack => self.metrics.current.victim_bytes_attack += bytes,
                    Class::Infra => {}
                }
                let replies = self.server.on_packet(&p, now);
                let occ = self.server.occupancy();
                if occ > self.server.cfg.backlog_capacity {
                    return Err(SimError::Invariant {
                        at: now,
                        what: format!("backlog holds {occ} entries"),
                    });
                }
                self.stats.max_backlog = self.stats.max_backlog.max(occ);
                for d in replies {
                    self.originate(eng, d)?;
                }
            }
            NodeKind::Host(_) => {
                let host = self.hosts.get_mut(&at).expect("every host node has a model");
                let before = completed(host);
                let actions = host.on_packet(&p, now);
                self.metrics.current.completed += completed(host) - before;
                self.host_actions(eng, at, actions)?;
            }
            NodeKind::Router(_) => {
                if !self.defense.enabled() {
                    return Ok(());
                }
                let actions = match &p.body {
                    Body::PushbackRequest(m) => self.defense.on_pushback_req(at, m, now, eng.prng()),
                    Body::PuzzleResponse(r) => {
                        self.defense
                            .on_puzzle_response(at, p.src, r.challenge_id, r.nonce, now, &self.net)
                    }
                    Body::BlockRequest(b) => {
                        self.defense.on_block_req(at, b, now);
                        Actions::default()
                    }
                    _ => Actions::default(),
                };
                self.defense_actions(eng, actions)?;
            }
        }
        Ok(())
    }

    fn relay(&mut self, eng: &mut Engine<Ev>, router: NodeId, p: Packet) -> Result<(), SimError> {
        let now = eng.now();
        let (src, class) = (p.src, self.class(p.src));
        let is_edge = self.net.edge_router(src) == Some(router);
        let outcome = {
            let Self { net, defense, .. } = self;
            let mut filter = defense.filter(eng.prng());
            net.forward(router, p, now, &mut filter)?
        };
        match outcome {
            ForwardOutcome::ForwardedTo {
                link,
                dir,
                tx_complete_at,
                ..
            } => {
                if is_edge {
                    self.stats.last_relayed_by_edge.insert(src, now);
                }
                eng.schedule(tx_complete_at, router, Ev::TxComplete { link, dir });
            }
            ForwardOutcome::QueueDropped { .. } => {}
            ForwardOutcome::Filtered => {
                *self.stats.filtered_by_class.entry(class).or_default() += 1;
                if class == Class::Attack {
                    self.stats.blocked_pkts += 1;
                }
            }
            ForwardOutcome::RateLimited => {
                *self.stats.rate_limited_by_class.entry(class).or_default() += 1;
                self.metrics.current.rate_limited += 1;
            }
        }
        Ok(())
    }

    fn originate(&mut self, eng: &mut Engine<Ev>, d: PacketDraft) -> Result<(), SimError> {
        let now = eng.now();
        let from = d.src;
        let p = self.factory.build(d, now);
        match self.class(from) {
            Class::Legit => self.metrics.current.legit_pkts += 1,
            Class::Attack => self.metrics.current.attack_pkts += 1,
            Class::Infra => {}
        }
        if let ForwardOutcome::ForwardedTo {
            link,
            dir,
            tx_complete_at,
            ..
        } = self.net.send(from, p, now)?
        {
            eng.schedule(tx_complete_at, from, Ev::TxComplete { link, dir });
        }
        Ok(())
    }

    fn host_actions(&mut self, eng: &mut Engine<Ev>, host: NodeId, a: HostActions) -> Result<(), SimError> {
        for d in a.sends {
            self.originate(eng, d)?;
        }
        for (t, timer) in a.timers {
            eng.schedule(t, host, Ev::Host(timer));
        }
        Ok(())
    }

    fn defense_actions(&mut self, eng: &mut Engine<Ev>, a: Actions) -> Result<(), SimError> {
        for d in a.sends {
            self.originate(eng, d)?;
        }
        for t in a.deadlines {
            eng.schedule(t.at, t.router, Ev::PuzzleDeadline(t));
        }
        Ok(())
    }
}

fn completed(h: &Host) -> u64 {
    match h {
        Host::Legit(c) => c.completed,
        Host::Attacker(_) => 0,
    }
}
