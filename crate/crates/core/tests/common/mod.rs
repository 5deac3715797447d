#![allow(dead_code)]

use std::path::PathBuf;

use pushback_sim::engine::SimTime;
use pushback_sim::metrics::{write_csv, SampleRow};
use pushback_sim::scenario::{load_scenario, Overrides, Role, ScenarioConfig};
use pushback_sim::sim::{run_scenario, RunReport};

pub const FIXTURES: [&str; 4] = ["figure4", "smart", "udp", "minimal"];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> ScenarioConfig {
    load_scenario(&fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn with_defense(mut cfg: ScenarioConfig, on: bool) -> ScenarioConfig {
    cfg.apply(&Overrides {
        defense: Some(on),
        ..Overrides::default()
    })
    .expect("override keeps the fixture valid");
    cfg
}

/// Stop the named attackers from sending anything.
pub fn silence(mut cfg: ScenarioConfig, names: &[&str]) -> ScenarioConfig {
    for n in names {
        let node = cfg.node_mut(n).unwrap_or_else(|| panic!("no node {n}"));
        assert_eq!(node.role, Some(Role::Attacker), "{n} is not an attacker");
        node.rate_pps = Some(0);
    }
    cfg.validate().expect("still valid");
    cfg
}

pub fn attackers(cfg: &ScenarioConfig) -> Vec<String> {
    cfg.nodes
        .iter()
        .filter(|n| n.role == Some(Role::Attacker) && n.rate_pps != Some(0))
        .map(|n| n.name.clone())
        .collect()
}

pub fn no_attack(cfg: ScenarioConfig) -> ScenarioConfig {
    let names = attackers(&cfg);
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    silence(cfg, &refs)
}

pub fn run(cfg: &ScenarioConfig) -> RunReport {
    run_scenario(cfg).expect("run completes")
}

pub fn csv_bytes(rows: &[SampleRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).unwrap();
    buf
}

pub fn secs(t: SimTime) -> f64 {
    t.as_nanos() as f64 / 1e9
}

/// Sum of a per-second column times the interval over rows whose interval
/// lies inside `(from_s, to_s]`, i.e. an event count.
pub fn window_count(
    rows: &[SampleRow],
    interval: SimTime,
    from_s: f64,
    to_s: f64,
    col: impl Fn(&SampleRow) -> f64,
) -> f64 {
    let iv = secs(interval);
    rows.iter()
        .filter(|r| {
            let t = secs(r.time);
            t - iv >= from_s - 1e-9 && t <= to_s + 1e-9
        })
        .map(|r| col(r) * iv)
        .sum()
}
