use std::collections::VecDeque;

/// Number of recent outcomes the controller judges.
pub const HISTORY_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChallengeOutcome {
    SolvedInTime,
    Failed,
}

/// Raises puzzle difficulty when nearly every suspect solves during
/// congestion, and lowers it when nearly none do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifficultyController {
    current_bits: u32,
    min_bits: u32,
    max_bits: u32,
    history: VecDeque<ChallengeOutcome>,
}

impl DifficultyController {
    pub fn new(initial_bits: u32, min_bits: u32, max_bits: u32) -> Self {
        assert!(min_bits <= initial_bits && initial_bits <= max_bits);
        DifficultyController {
            current_bits: initial_bits,
            min_bits,
            max_bits,
            history: VecDeque::with_capacity(HISTORY_LEN),
        }
    }

    pub fn current_bits(&self) -> u32 {
        self.current_bits
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Append an outcome and re-evaluate. Returns the resulting difficulty.
    pub fn record(&mut self, outcome: ChallengeOutcome, congestion_active: bool) -> u32 {
        if self.history.len() == HISTORY_LEN {
            self.history.pop_front();
        }
        self.history.push_back(outcome);
        self.adapt(congestion_active)
    }

    pub fn adapt(&mut self, congestion_active: bool) -> u32 {
        if self.history.len() < HISTORY_LEN {
            return self.current_bits;
        }
        let solved = self
            .history
            .iter()
            .filter(|o| **o == ChallengeOutcome::SolvedInTime)
            .count();
        let total = self.history.len();
        // solved/total >= 0.9 and <= 0.1, in integers
        if congestion_active && solved * 10 >= total * 9 {
            self.current_bits = (self.current_bits + 1).min(self.max_bits);
            self.history.clear();
        } else if solved * 10 <= total {
            self.current_bits = self.current_bits.saturating_sub(1).max(self.min_bits);
            self.history.clear();
        }
        self.current_bits
    }
}
