//! Congestion signatures built from the victim-facing link's drop tallies.

use std::collections::BTreeMap;

use crate::engine::SimTime;
use crate::netmodel::{NodeId, SlidingTally, WindowStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    pub drop_fraction_threshold: f64,
    pub min_activity_bytes: u64,
    pub suspect_share_threshold: f64,
    pub calm_windows: u32,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            drop_fraction_threshold: 0.1,
            min_activity_bytes: 10_000,
            suspect_share_threshold: 0.2,
            calm_windows: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignatureState {
    Active,
    Pushed,
    Resolved,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Suspect {
    pub src: NodeId,
    pub dropped_bytes: u64,
    /// Fraction of all window drops attributed to this source.
    pub drop_share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionSignature {
    pub sig_id: u32,
    pub victim: NodeId,
    pub created_at: SimTime,
    pub window_stats: WindowStats,
    pub suspects: Vec<Suspect>,
    pub state: SignatureState,
    pub below_threshold_windows: u32,
    /// Last pushback sent on behalf of each suspect.
    pub pushed_at: BTreeMap<NodeId, SimTime>,
}

impl CongestionSignature {
    pub fn is_live(&self) -> bool {
        self.state != SignatureState::Resolved
    }

    pub fn suspect_ids(&self) -> Vec<NodeId> {
        self.suspects.iter().map(|s| s.src).collect()
    }

    pub fn remove_suspect(&mut self, src: NodeId) {
        self.suspects.retain(|s| s.src != src);
    }
}

/// Window totals over data-plane traffic only.
pub fn observe_window(tally: &SlidingTally, now: SimTime) -> WindowStats {
    tally.window(now, |kind| !kind.is_defense_plane())
}

pub fn drop_fraction(stats: &WindowStats) -> f64 {
    if stats.total_arrived == 0 {
        0.0
    } else {
        stats.total_dropped as f64 / stats.total_arrived as f64
    }
}

pub fn is_congested(stats: &WindowStats, params: &DetectionParams) -> bool {
    stats.total_arrived >= params.min_activity_bytes && drop_fraction(stats) >= params.drop_fraction_threshold
}

/// Sources whose share of the window's drops reaches the threshold, largest
/// share first, lower id first among equals.
pub fn rank_suspects(stats: &WindowStats, share_threshold: f64) -> Vec<Suspect> {
    if stats.total_dropped == 0 {
        return Vec::new();
    }
    let total = stats.total_dropped as f64;
    let mut suspects: Vec<Suspect> = stats
        .per_source
        .iter()
        .map(|(src, t)| Suspect {
            src: *src,
            dropped_bytes: t.dropped,
            drop_share: t.dropped as f64 / total,
        })
        .filter(|s| s.dropped_bytes > 0 && s.drop_share >= share_threshold)
        .collect();
    suspects.sort_by(|a, b| b.dropped_bytes.cmp(&a.dropped_bytes).then(a.src.cmp(&b.src)));
    suspects
}

/// Signature bookkeeping for one victim at the detecting router.
#[derive(Debug, Clone)]
pub struct Detector {
    pub victim: NodeId,
    pub params: DetectionParams,
    current: Option<CongestionSignature>,
    next_sig_id: u32,
}

impl Detector {
    pub fn new(victim: NodeId, params: DetectionParams) -> Self {
        Detector {
            victim,
            params,
            current: None,
            next_sig_id: 1,
        }
    }

    pub fn signature(&self) -> Option<&CongestionSignature> {
        self.current.as_ref()
    }

    pub fn signature_mut(&mut self) -> Option<&mut CongestionSignature> {
        self.current.as_mut()
    }

    pub fn live_signature(&self) -> Option<&CongestionSignature> {
        self.current.as_ref().filter(|s| s.is_live())
    }

    pub fn signatures_created(&self) -> u32 {
        self.next_sig_id - 1
    }

    /// Create a signature, or refresh the live one, if the window shows
    /// congestion. Returns the affected signature.
    pub fn detect(&mut self, stats: &WindowStats, now: SimTime) -> Option<&CongestionSignature> {
        if !is_congested(stats, &self.params) {
            return None;
        }
        let suspects = rank_suspects(stats, self.params.suspect_share_threshold);
        match self.current.as_mut().filter(|s| s.is_live()) {
            Some(sig) => {
                sig.window_stats = stats.clone();
                sig.suspects = suspects;
            }
            None => {
                let sig_id = self.next_sig_id;
                self.next_sig_id += 1;
                self.current = Some(CongestionSignature {
                    sig_id,
                    victim: self.victim,
                    created_at: now,
                    window_stats: stats.clone(),
                    suspects,
                    state: SignatureState::Active,
                    below_threshold_windows: 0,
                    pushed_at: BTreeMap::new(),
                });
            }
        }
        self.current.as_ref()
    }

    /// Count calm windows on the live signature; resolve it after enough in a
    /// row. Returns the signature's state afterwards, if one exists.
    pub fn update_signature(&mut self, stats: &WindowStats) -> Option<SignatureState> {
        let calm_needed = self.params.calm_windows;
        let threshold = self.params.drop_fraction_threshold;
        let sig = self.current.as_mut()?;
        if sig.state == SignatureState::Resolved {
            return Some(sig.state);
        }
        if drop_fraction(stats) < threshold {
            sig.below_threshold_windows += 1;
            if sig.below_threshold_windows >= calm_needed {
                sig.state = SignatureState::Resolved;
            }
        } else {
            sig.below_threshold_windows = 0;
        }
        Some(sig.state)
    }
}
