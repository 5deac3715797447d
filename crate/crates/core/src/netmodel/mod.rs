//! Topology, links, static routing and per-hop forwarding.

mod link;
mod packet;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::engine::SimTime;

pub use link::{
    ByteTally, DirCounters, Direction, EnqueueOutcome, LinkDirection, LinkId, LinkQueue, PacketBytes, SlidingTally,
    WindowStats,
};
pub use packet::{
    BlockMsg, Body, ChallengeMsg, Packet, PacketDraft, PacketFactory, PacketKind, PacketSizes, PushbackMsg,
    ResponseMsg, MIN_PACKET_BYTES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub u16);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HostRole {
    Legitimate,
    Attacker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RouterRole {
    Plain,
    Intelligent,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Host(HostRole),
    Router(RouterRole),
    Server,
}

impl NodeKind {
    pub fn is_router(self) -> bool {
        matches!(self, NodeKind::Router(_))
    }

    pub fn is_host(self) -> bool {
        matches!(self, NodeKind::Host(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub bandwidth_bps: u64,
    pub delay: SimTime,
    pub queue_pkts: usize,
}

/// Bucketing used by every link's observation tally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TallyConfig {
    pub bucket: SimTime,
    pub buckets_per_window: u64,
}

impl Default for TallyConfig {
    fn default() -> Self {
        TallyConfig {
            bucket: SimTime::from_millis(100),
            buckets_per_window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("duplicate node name `{0}`")]
    DuplicateName(String),
    #[error("link {index} references unknown node `{name}`")]
    UnknownNode { index: usize, name: String },
    #[error("link {a}-{b} has zero bandwidth")]
    ZeroBandwidth { a: String, b: String },
    #[error("link {a}-{b} has a zero-packet queue")]
    ZeroQueue { a: String, b: String },
    #[error("link {0}-{0} connects a node to itself")]
    SelfLink(String),
    #[error("duplicate link {a}-{b}")]
    DuplicateLink { a: String, b: String },
    #[error("host `{0}` must attach to exactly one router")]
    HostAttachment(String),
    #[error("expected exactly one server, found {0}")]
    ServerCount(usize),
    #[error("`{to}` is unreachable from `{from}`")]
    Disconnected { from: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("no route from {from} to {to}")]
    NoRoute { from: NodeId, to: NodeId },
    #[error("{from} and {to} are not adjacent")]
    NotAdjacent { from: NodeId, to: NodeId },
}

/// Decision a router's installed filters make about a transiting packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterVerdict {
    Pass,
    Block,
    RateLimit,
}

pub trait PacketFilter {
    fn verdict(&mut self, router: NodeId, p: &Packet, now: SimTime) -> FilterVerdict;
}

/// Filter that lets everything through.
pub struct NoFilter;

impl PacketFilter for NoFilter {
    fn verdict(&mut self, _: NodeId, _: &Packet, _: SimTime) -> FilterVerdict {
        FilterVerdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardOutcome {
    ForwardedTo {
        next_hop: NodeId,
        link: LinkId,
        dir: Direction,
        tx_complete_at: SimTime,
    },
    QueueDropped {
        next_hop: NodeId,
    },
    Filtered,
    RateLimited,
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<LinkQueue>,
    adjacency: Vec<BTreeMap<NodeId, LinkId>>,
    next_hop: Vec<Vec<Option<NodeId>>>,
    edge_router: Vec<Option<NodeId>>,
    server: NodeId,
}

/// Instantiate nodes and links and compute hop-count routes.
///
/// Next hops are chosen among neighbours one hop closer to the destination,
/// lowest id first. Hosts and the server never carry transit traffic.
pub fn build_topology(nodes: &[NodeSpec], links: &[LinkSpec], tally: TallyConfig) -> Result<Network, TopologyError> {
    let mut by_name = BTreeMap::new();
    let mut built = Vec::with_capacity(nodes.len());
    for (i, spec) in nodes.iter().enumerate() {
        let id = NodeId(i as u16);
        if by_name.insert(spec.name.clone(), id).is_some() {
            return Err(TopologyError::DuplicateName(spec.name.clone()));
        }
        built.push(Node {
            id,
            name: spec.name.clone(),
            kind: spec.kind,
        });
    }

    let servers: Vec<NodeId> = built
        .iter()
        .filter(|n| n.kind == NodeKind::Server)
        .map(|n| n.id)
        .collect();
    if servers.len() != 1 {
        return Err(TopologyError::ServerCount(servers.len()));
    }

    let mut adjacency = vec![BTreeMap::new(); built.len()];
    let mut queues = Vec::with_capacity(links.len());
    for (index, spec) in links.iter().enumerate() {
        let lookup = |name: &String| {
            by_name.get(name).copied().ok_or_else(|| TopologyError::UnknownNode {
                index,
                name: name.clone(),
            })
        };
        let a = lookup(&spec.a)?;
        let b = lookup(&spec.b)?;
        if a == b {
            return Err(TopologyError::SelfLink(spec.a.clone()));
        }
        if spec.bandwidth_bps == 0 {
            return Err(TopologyError::ZeroBandwidth {
                a: spec.a.clone(),
                b: spec.b.clone(),
            });
        }
        if spec.queue_pkts == 0 {
            return Err(TopologyError::ZeroQueue {
                a: spec.a.clone(),
                b: spec.b.clone(),
            });
        }
        let id = LinkId(queues.len());
        if adjacency[a.index()].insert(b, id).is_some() {
            return Err(TopologyError::DuplicateLink {
                a: spec.a.clone(),
                b: spec.b.clone(),
            });
        }
        adjacency[b.index()].insert(a, id);
        queues.push(LinkQueue::new(
            a,
            b,
            spec.bandwidth_bps,
            spec.delay,
            spec.queue_pkts,
            SlidingTally::new(tally.bucket, tally.buckets_per_window),
        ));
    }

    let mut edge_router = vec![None; built.len()];
    for node in &built {
        if node.kind.is_host() {
            let adj = &adjacency[node.id.index()];
            let router = adj.keys().next().copied().filter(|r| built[r.index()].kind.is_router());
            match router {
                Some(r) if adj.len() == 1 => edge_router[node.id.index()] = Some(r),
                _ => return Err(TopologyError::HostAttachment(node.name.clone())),
            }
        }
    }

    let next_hop = compute_routes(&built, &adjacency);
    for from in &built {
        for to in &built {
            if from.id != to.id && next_hop[from.id.index()][to.id.index()].is_none() {
                return Err(TopologyError::Disconnected {
                    from: from.name.clone(),
                    to: to.name.clone(),
                });
            }
        }
    }

    Ok(Network {
        nodes: built,
        links: queues,
        adjacency,
        next_hop,
        edge_router,
        server: servers[0],
    })
}

fn compute_routes(nodes: &[Node], adjacency: &[BTreeMap<NodeId, LinkId>]) -> Vec<Vec<Option<NodeId>>> {
    let n = nodes.len();
    let mut next_hop = vec![vec![None; n]; n];
    for dst in nodes {
        // BFS outward from the destination; only routers relay.
        let mut dist = vec![u32::MAX; n];
        dist[dst.id.index()] = 0;
        let mut frontier = VecDeque::from([dst.id]);
        while let Some(u) = frontier.pop_front() {
            if u != dst.id && !nodes[u.index()].kind.is_router() {
                continue;
            }
            for &v in adjacency[u.index()].keys() {
                if dist[v.index()] == u32::MAX {
                    dist[v.index()] = dist[u.index()] + 1;
                    frontier.push_back(v);
                }
            }
        }
        for src in nodes {
            if src.id == dst.id || dist[src.id.index()] == u32::MAX {
                continue;
            }
            let want = dist[src.id.index()] - 1;
            next_hop[src.id.index()][dst.id.index()] = adjacency[src.id.index()]
                .keys()
                .copied()
                .filter(|v| dist[v.index()] == want)
                .find(|v| *v == dst.id || nodes[v.index()].kind.is_router());
        }
    }
    next_hop
}

impl Network {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    pub fn server(&self) -> NodeId {
        self.server
    }

    pub fn links(&self) -> &[LinkQueue] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &LinkQueue {
        &self.links[id.0]
    }

    pub fn link_mut(&mut self, id: LinkId) -> &mut LinkQueue {
        &mut self.links[id.0]
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[id.index()].keys().copied()
    }

    pub fn link_between(&self, from: NodeId, to: NodeId) -> Option<(LinkId, Direction)> {
        let id = *self.adjacency[from.index()].get(&to)?;
        let dir = self.links[id.0].direction_from(from)?;
        Some((id, dir))
    }

    pub fn next_hop(&self, from: NodeId, to: NodeId) -> Option<NodeId> {
        self.next_hop[from.index()][to.index()]
    }

    /// The router a host attaches to.
    pub fn edge_router(&self, host: NodeId) -> Option<NodeId> {
        self.edge_router[host.index()]
    }

    /// Every node visited from `from` to `to`, both ends included.
    pub fn path(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        let mut path = vec![from];
        let mut at = from;
        while at != to {
            at = self.next_hop(at, to)?;
            path.push(at);
            if path.len() > self.nodes.len() {
                return None;
            }
        }
        Some(path)
    }

    /// Put `p` on the link toward `next_hop`, bypassing filters.
    pub fn transmit(
        &mut self,
        from: NodeId,
        next_hop: NodeId,
        p: Packet,
        now: SimTime,
    ) -> Result<ForwardOutcome, NetError> {
        let (link, dir) = self
            .link_between(from, next_hop)
            .ok_or(NetError::NotAdjacent { from, to: next_hop })?;
        Ok(match self.links[link.0].enqueue(dir, p, now) {
            EnqueueOutcome::Accepted { tx_complete_at } => ForwardOutcome::ForwardedTo {
                next_hop,
                link,
                dir,
                tx_complete_at,
            },
            EnqueueOutcome::Dropped => ForwardOutcome::QueueDropped { next_hop },
        })
    }

    /// Originate a packet at `from` (host, server, or router).
    pub fn send(&mut self, from: NodeId, p: Packet, now: SimTime) -> Result<ForwardOutcome, NetError> {
        let next = self
            .next_hop(from, p.dst)
            .ok_or(NetError::NoRoute { from, to: p.dst })?;
        self.transmit(from, next, p, now)
    }

    /// Relay a packet that arrived at `router` and is addressed elsewhere,
    /// after consulting that router's filters.
    pub fn forward(
        &mut self,
        router: NodeId,
        p: Packet,
        now: SimTime,
        filter: &mut impl PacketFilter,
    ) -> Result<ForwardOutcome, NetError> {
        debug_assert!(self.node(router).kind.is_router());
        let next = self.next_hop(router, p.dst).ok_or(NetError::NoRoute {
            from: router,
            to: p.dst,
        })?;
        match filter.verdict(router, &p, now) {
            FilterVerdict::Block => Ok(ForwardOutcome::Filtered),
            FilterVerdict::RateLimit => Ok(ForwardOutcome::RateLimited),
            FilterVerdict::Pass => self.transmit(router, next, p, now),
        }
    }

    pub fn conserves(&self) -> bool {
        self.links
            .iter()
            .all(|l| l.dir(Direction::AtoB).conserves() && l.dir(Direction::BtoA).conserves())
    }
}
