//! Scenario documents: strict JSON parsing, defaulting and validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defense::{DefenseConfig, DetectionParams, MAX_DIFFICULTY_BITS};
use crate::endpoints::{AttackMode, AttackerConfig, ClientConfig, ServerConfig};
use crate::engine::SimTime;
use crate::netmodel::{
    build_topology, HostRole, LinkSpec, Network, NodeKind, NodeSpec, PacketSizes, RouterRole, TallyConfig,
    TopologyError, MIN_PACKET_BYTES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Io,
    Syntax,
    UnknownKey,
    Schema,
    DuplicateName,
    UnknownNode,
    ServerCount,
    Disconnected,
    Topology,
    Roles,
    InvalidValue,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Io => "io",
            ErrorCode::Syntax => "syntax",
            ErrorCode::UnknownKey => "unknown_key",
            ErrorCode::Schema => "schema",
            ErrorCode::DuplicateName => "duplicate_name",
            ErrorCode::UnknownNode => "unknown_node",
            ErrorCode::ServerCount => "server_count",
            ErrorCode::Disconnected => "disconnected",
            ErrorCode::Topology => "topology",
            ErrorCode::Roles => "roles",
            ErrorCode::InvalidValue => "invalid_value",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A configuration problem, rendered as `error[<code>]: <message>`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("error[{code}]: {message}")]
pub struct ConfigError {
    pub code: ErrorCode,
    pub message: String,
}

impl ConfigError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ConfigError {
            code,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        ConfigError::new(ErrorCode::InvalidValue, message)
    }
}

impl From<TopologyError> for ConfigError {
    fn from(e: TopologyError) -> Self {
        let code = match e {
            TopologyError::DuplicateName(_) => ErrorCode::DuplicateName,
            TopologyError::UnknownNode { .. } => ErrorCode::UnknownNode,
            TopologyError::ServerCount(_) => ErrorCode::ServerCount,
            TopologyError::Disconnected { .. } => ErrorCode::Disconnected,
            TopologyError::ZeroBandwidth { .. } | TopologyError::ZeroQueue { .. } => ErrorCode::InvalidValue,
            TopologyError::SelfLink(_) | TopologyError::DuplicateLink { .. } | TopologyError::HostAttachment(_) => {
                ErrorCode::Topology
            }
        };
        ConfigError::new(code, e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Host,
    Router,
    Server,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Legitimate,
    Attacker,
    Plain,
    Edge,
    Intelligent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SynFlood,
    UdpFlood,
}

/// One node. Which parameters are allowed depends on `kind` and `role`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub name: String,
    pub kind: Option<Kind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt_rate_cps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rto_initial_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rto_max_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooldown_ms: Option<u64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_pps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smart: Option<bool>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash_cost_ns: Option<u64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backlog_capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_open_timeout_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expiry_interval_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: String,
    pub b: String,
    pub bandwidth_bps: u64,
    #[serde(default = "default_delay_ns")]
    pub delay_ns: u64,
    #[serde(default = "default_queue_pkts")]
    pub queue_pkts: usize,
}

fn default_delay_ns() -> u64 {
    5_000_000
}

fn default_queue_pkts() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefenseSection {
    pub enabled: bool,
    pub drop_fraction_threshold: f64,
    pub min_activity_bytes: u64,
    pub suspect_share_threshold: f64,
    pub calm_windows: u32,
    pub bucket_ms: u64,
    pub window_ms: u64,
    pub observe_interval_ms: u64,
    pub puzzle_timeout_ms: u64,
    pub difficulty_initial: u32,
    pub difficulty_min: u32,
    pub difficulty_max: u32,
    pub whitelist_ttl_ms: u64,
    pub block_ttl_ms: u64,
    pub admit_fraction: f64,
    pub repush_interval_ms: u64,
    pub congestion_hold_ms: u64,
}

impl Default for DefenseSection {
    fn default() -> Self {
        DefenseSection {
            enabled: true,
            drop_fraction_threshold: 0.1,
            min_activity_bytes: 10_000,
            suspect_share_threshold: 0.2,
            calm_windows: 3,
            bucket_ms: 100,
            window_ms: 1000,
            observe_interval_ms: 100,
            puzzle_timeout_ms: 2000,
            difficulty_initial: 8,
            difficulty_min: 0,
            difficulty_max: MAX_DIFFICULTY_BITS,
            whitelist_ttl_ms: 60_000,
            block_ttl_ms: 60_000,
            admit_fraction: 0.1,
            repush_interval_ms: 1000,
            congestion_hold_ms: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub duration_s: f64,
    pub seed: u64,
    pub sample_interval_ms: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            duration_s: 30.0,
            seed: 1,
            sample_interval_ms: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SizesSection {
    pub control_bytes: u32,
    pub data_bytes: u32,
}

impl Default for SizesSection {
    fn default() -> Self {
        let d = PacketSizes::default();
        SizesSection {
            control_bytes: d.control_bytes,
            data_bytes: d.data_bytes,
        }
    }
}

/// A scenario document. After [`ScenarioConfig::validate`] every default is
/// filled in and serialising it yields the effective configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub nodes: Vec<NodeConfig>,
    pub links: Vec<LinkConfig>,
    #[serde(default)]
    pub defense: DefenseSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sizes: SizesSection,
}

/// Command-line overrides applied on top of a document.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    pub defense: Option<bool>,
    pub sample_interval_ms: Option<u64>,
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        if inner.is_syntax() || inner.is_eof() {
            ConfigError::new(ErrorCode::Syntax, msg)
        } else if msg.starts_with("unknown field") {
            ConfigError::new(ErrorCode::UnknownKey, format!("unknown key `{path}`"))
        } else {
            ConfigError::new(ErrorCode::Schema, format!("at `{path}`: {msg}"))
        }
    })?;
    de.end()
        .map_err(|e| ConfigError::new(ErrorCode::Syntax, e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(ErrorCode::Io, format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

fn ms(v: u64) -> SimTime {
    SimTime::from_millis(v)
}

fn check_fraction(name: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::invalid(format!(
            "`defense.{name}` must lie in [0, 1], got {v}"
        )))
    }
}

impl NodeConfig {
    fn set_fields(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut f = |present: bool, name| {
            if present {
                v.push(name)
            }
        };
        f(self.attempt_rate_cps.is_some(), "attempt_rate_cps");
        f(self.rto_initial_ms.is_some(), "rto_initial_ms");
        f(self.rto_max_ms.is_some(), "rto_max_ms");
        f(self.max_retries.is_some(), "max_retries");
        f(self.cooldown_ms.is_some(), "cooldown_ms");
        f(self.rate_pps.is_some(), "rate_pps");
        f(self.mode.is_some(), "mode");
        f(self.smart.is_some(), "smart");
        f(self.start_ms.is_some(), "start_ms");
        f(self.stop_ms.is_some(), "stop_ms");
        f(self.hash_cost_ns.is_some(), "hash_cost_ns");
        f(self.backlog_capacity.is_some(), "backlog_capacity");
        f(self.half_open_timeout_ms.is_some(), "half_open_timeout_ms");
        f(self.expiry_interval_ms.is_some(), "expiry_interval_ms");
        v
    }

    fn allowed_fields(kind: Kind, role: Option<Role>) -> &'static [&'static str] {
        const HOST: [&str; 3] = ["start_ms", "stop_ms", "hash_cost_ns"];
        match (kind, role) {
            (Kind::Host, Some(Role::Legitimate)) => &[
                "attempt_rate_cps",
                "rto_initial_ms",
                "rto_max_ms",
                "max_retries",
                "cooldown_ms",
                HOST[0],
                HOST[1],
                HOST[2],
            ],
            (Kind::Host, Some(Role::Attacker)) => &["rate_pps", "mode", "smart", HOST[0], HOST[1], HOST[2]],
            (Kind::Server, _) => &["backlog_capacity", "half_open_timeout_ms", "expiry_interval_ms"],
            _ => &[],
        }
    }

    fn normalize(&mut self, index: usize) -> Result<(), ConfigError> {
        let name = self.name.clone();
        let kind = self
            .kind
            .ok_or_else(|| ConfigError::new(ErrorCode::Schema, format!("at `nodes[{index}]`: missing field `kind`")))?;
        let role_err = |msg: &str| ConfigError::new(ErrorCode::Roles, format!("node `{name}`: {msg}"));
        match (kind, self.role) {
            (Kind::Host, None) => return Err(role_err("hosts need a role of `legitimate` or `attacker`")),
            (Kind::Host, Some(Role::Legitimate | Role::Attacker)) => {}
            (Kind::Host, Some(_)) => return Err(role_err("hosts must be `legitimate` or `attacker`")),
            (Kind::Router, None) => self.role = Some(Role::Plain),
            (Kind::Router, Some(Role::Plain | Role::Edge | Role::Intelligent)) => {}
            (Kind::Router, Some(_)) => return Err(role_err("routers must be `plain`, `edge` or `intelligent`")),
            (Kind::Server, None) => {}
            (Kind::Server, Some(_)) => return Err(role_err("the server takes no role")),
        }
        let allowed = Self::allowed_fields(kind, self.role);
        if let Some(bad) = self.set_fields().into_iter().find(|f| !allowed.contains(f)) {
            return Err(ConfigError::new(
                ErrorCode::Schema,
                format!("at `nodes[{index}].{bad}`: not a parameter of node `{name}`"),
            ));
        }
        let invalid = |msg: String| ConfigError::invalid(format!("node `{name}`: {msg}"));
        match (kind, self.role) {
            (Kind::Host, Some(role)) => {
                self.start_ms.get_or_insert(0);
                self.hash_cost_ns.get_or_insert(1000);
                if let Some(stop) = self.stop_ms {
                    if stop <= self.start_ms.unwrap() {
                        return Err(invalid("`stop_ms` must exceed `start_ms`".into()));
                    }
                }
                if self.hash_cost_ns == Some(0) {
                    return Err(invalid("`hash_cost_ns` must be positive".into()));
                }
                if role == Role::Legitimate {
                    let d = ClientConfig::default();
                    let rate = *self.attempt_rate_cps.get_or_insert(d.attempt_rate_cps);
                    if !rate.is_finite() || !(0.0..=1e9).contains(&rate) {
                        return Err(invalid(format!(
                            "`attempt_rate_cps` must be a rate in [0, 1e9], got {rate}"
                        )));
                    }
                    let rto = *self.rto_initial_ms.get_or_insert(1000);
                    let rto_max = *self.rto_max_ms.get_or_insert(32_000);
                    self.max_retries.get_or_insert(d.max_retries);
                    self.cooldown_ms.get_or_insert(5000);
                    if rto == 0 || rto_max < rto {
                        return Err(invalid("need 0 < `rto_initial_ms` <= `rto_max_ms`".into()));
                    }
                } else {
                    self.rate_pps.get_or_insert(500);
                    self.mode.get_or_insert(Mode::SynFlood);
                    self.smart.get_or_insert(false);
                    if self.rate_pps.unwrap() > 1_000_000_000 {
                        return Err(invalid("`rate_pps` exceeds one packet per nanosecond".into()));
                    }
                }
            }
            (Kind::Server, _) => {
                let d = ServerConfig::default();
                let cap = *self.backlog_capacity.get_or_insert(d.backlog_capacity);
                self.half_open_timeout_ms.get_or_insert(10_000);
                let every = *self.expiry_interval_ms.get_or_insert(100);
                if cap == 0 || every == 0 {
                    return Err(invalid(
                        "`backlog_capacity` and `expiry_interval_ms` must be positive".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn node_kind(&self) -> NodeKind {
        match (self.kind.expect("validated"), self.role) {
            (Kind::Host, Some(Role::Attacker)) => NodeKind::Host(HostRole::Attacker),
            (Kind::Host, _) => NodeKind::Host(HostRole::Legitimate),
            (Kind::Router, Some(Role::Intelligent)) => NodeKind::Router(RouterRole::Intelligent),
            (Kind::Router, Some(Role::Edge)) => NodeKind::Router(RouterRole::Edge),
            (Kind::Router, _) => NodeKind::Router(RouterRole::Plain),
            (Kind::Server, _) => NodeKind::Server,
        }
    }

    pub fn client_config(&self) -> ClientConfig {
        ClientConfig {
            attempt_rate_cps: self.attempt_rate_cps.expect("validated"),
            rto_initial: ms(self.rto_initial_ms.expect("validated")),
            rto_max: ms(self.rto_max_ms.expect("validated")),
            max_retries: self.max_retries.expect("validated"),
            cooldown: ms(self.cooldown_ms.expect("validated")),
            start: ms(self.start_ms.expect("validated")),
            stop: self.stop_ms.map(ms),
            hash_cost: SimTime::from_nanos(self.hash_cost_ns.expect("validated")),
        }
    }

    pub fn attacker_config(&self) -> AttackerConfig {
        AttackerConfig {
            rate_pps: self.rate_pps.expect("validated"),
            mode: match self.mode.expect("validated") {
                Mode::SynFlood => AttackMode::SynFlood,
                Mode::UdpFlood => AttackMode::UdpFlood,
            },
            smart: self.smart.expect("validated"),
            start: ms(self.start_ms.expect("validated")),
            stop: self.stop_ms.map(ms),
            hash_cost: SimTime::from_nanos(self.hash_cost_ns.expect("validated")),
        }
    }

    pub fn server_config(&self) -> ServerConfig {
        ServerConfig {
            backlog_capacity: self.backlog_capacity.expect("validated"),
            half_open_timeout: ms(self.half_open_timeout_ms.expect("validated")),
            expiry_interval: ms(self.expiry_interval_ms.expect("validated")),
        }
    }
}

impl ScenarioConfig {
    /// Fill defaults and check every semantic rule. Idempotent.
    pub fn validate(&mut self) -> Result<(), ConfigError> {
        let mut seen = std::collections::BTreeSet::new();
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if n.name.is_empty() {
                return Err(ConfigError::new(
                    ErrorCode::Schema,
                    format!("at `nodes[{i}].name`: empty name"),
                ));
            }
            if !seen.insert(n.name.clone()) {
                return Err(ConfigError::new(
                    ErrorCode::DuplicateName,
                    format!("duplicate node name `{}`", n.name),
                ));
            }
            n.normalize(i)?;
        }
        if self.nodes.len() > u16::MAX as usize {
            return Err(ConfigError::invalid("too many nodes"));
        }
        let intelligent = self.nodes.iter().filter(|n| n.role == Some(Role::Intelligent)).count();
        if self.defense.enabled && intelligent == 0 {
            return Err(ConfigError::new(
                ErrorCode::Roles,
                "defense is enabled but no router has role `intelligent`",
            ));
        }

        let d = &self.defense;
        check_fraction("drop_fraction_threshold", d.drop_fraction_threshold)?;
        check_fraction("suspect_share_threshold", d.suspect_share_threshold)?;
        if !(d.admit_fraction > 0.0 && d.admit_fraction <= 1.0) {
            return Err(ConfigError::invalid(format!(
                "`defense.admit_fraction` must lie in (0, 1], got {}",
                d.admit_fraction
            )));
        }
        if !(d.difficulty_min <= d.difficulty_initial
            && d.difficulty_initial <= d.difficulty_max
            && d.difficulty_max <= MAX_DIFFICULTY_BITS)
        {
            return Err(ConfigError::invalid(format!(
                "need difficulty_min <= difficulty_initial <= difficulty_max <= {MAX_DIFFICULTY_BITS}"
            )));
        }
        if d.bucket_ms == 0 || d.window_ms == 0 || !d.window_ms.is_multiple_of(d.bucket_ms) {
            return Err(ConfigError::invalid(
                "`defense.window_ms` must be a positive multiple of `defense.bucket_ms`",
            ));
        }
        if d.observe_interval_ms == 0 || d.calm_windows == 0 || d.puzzle_timeout_ms == 0 {
            return Err(ConfigError::invalid(
                "`defense.observe_interval_ms`, `calm_windows` and `puzzle_timeout_ms` must be positive",
            ));
        }

        let r = &self.run;
        if !(r.duration_s.is_finite() && r.duration_s > 0.0 && r.duration_s <= 1e6) {
            return Err(ConfigError::invalid(format!(
                "`run.duration_s` must lie in (0, 1e6], got {}",
                r.duration_s
            )));
        }
        if r.sample_interval_ms == 0 {
            return Err(ConfigError::invalid("`run.sample_interval_ms` must be positive"));
        }
        if self.sizes.control_bytes < MIN_PACKET_BYTES || self.sizes.data_bytes < MIN_PACKET_BYTES {
            return Err(ConfigError::invalid(format!(
                "packet sizes must be at least {MIN_PACKET_BYTES} bytes"
            )));
        }
        self.network()?;
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(d) = o.duration_s {
            self.run.duration_s = d;
        }
        if let Some(e) = o.defense {
            self.defense.enabled = e;
        }
        if let Some(i) = o.sample_interval_ms {
            self.run.sample_interval_ms = i;
        }
        self.validate()
    }

    pub fn node_specs(&self) -> Vec<NodeSpec> {
        self.nodes
            .iter()
            .map(|n| NodeSpec {
                name: n.name.clone(),
                kind: n.node_kind(),
            })
            .collect()
    }

    pub fn link_specs(&self) -> Vec<LinkSpec> {
        self.links
            .iter()
            .map(|l| LinkSpec {
                a: l.a.clone(),
                b: l.b.clone(),
                bandwidth_bps: l.bandwidth_bps,
                delay: SimTime::from_nanos(l.delay_ns),
                queue_pkts: l.queue_pkts,
            })
            .collect()
    }

    pub fn tally(&self) -> TallyConfig {
        TallyConfig {
            bucket: ms(self.defense.bucket_ms),
            buckets_per_window: self.defense.window_ms / self.defense.bucket_ms,
        }
    }

    pub fn network(&self) -> Result<Network, ConfigError> {
        Ok(build_topology(&self.node_specs(), &self.link_specs(), self.tally())?)
    }

    pub fn defense_config(&self) -> DefenseConfig {
        let d = &self.defense;
        DefenseConfig {
            enabled: d.enabled,
            detection: DetectionParams {
                drop_fraction_threshold: d.drop_fraction_threshold,
                min_activity_bytes: d.min_activity_bytes,
                suspect_share_threshold: d.suspect_share_threshold,
                calm_windows: d.calm_windows,
            },
            window: self.tally(),
            puzzle_timeout: ms(d.puzzle_timeout_ms),
            initial_difficulty: d.difficulty_initial,
            min_difficulty: d.difficulty_min,
            max_difficulty: d.difficulty_max,
            whitelist_ttl: ms(d.whitelist_ttl_ms),
            block_ttl: ms(d.block_ttl_ms),
            admit_fraction: d.admit_fraction,
            repush_interval: ms(d.repush_interval_ms),
            congestion_hold: ms(d.congestion_hold_ms),
        }
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_nanos((self.run.duration_s * 1e9).round() as u64)
    }

    pub fn sample_interval(&self) -> SimTime {
        ms(self.run.sample_interval_ms)
    }

    pub fn observe_interval(&self) -> SimTime {
        ms(self.defense.observe_interval_ms)
    }

    pub fn sizes(&self) -> PacketSizes {
        PacketSizes {
            control_bytes: self.sizes.control_bytes,
            data_bytes: self.sizes.data_bytes,
        }
    }

    pub fn node(&self, name: &str) -> Option<&NodeConfig> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn node_mut(&mut self, name: &str) -> Option<&mut NodeConfig> {
        self.nodes.iter_mut().find(|n| n.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }
}
