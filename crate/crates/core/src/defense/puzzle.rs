//! Hash-preimage client puzzles.
//!
//! A solution to challenge `c` at difficulty `d` is any nonce `n` for which
//! `SHA-256(be64(c) || be64(n))` starts with `d` zero bits, counting from the
//! most significant bit of the first byte.

use sha2::{Digest, Sha256};

use crate::engine::SimTime;
use crate::netmodel::NodeId;

/// Largest supported difficulty.
pub const MAX_DIFFICULTY_BITS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PuzzleChallenge {
    pub challenge_id: u64,
    pub difficulty_bits: u32,
    pub issued_to: NodeId,
    pub issued_by: NodeId,
    pub issued_at: SimTime,
    pub deadline: SimTime,
}

pub fn puzzle_digest(challenge_id: u64, nonce: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(challenge_id.to_be_bytes());
    h.update(nonce.to_be_bytes());
    h.finalize().into()
}

fn leading_zero_bits(digest: &[u8; 32]) -> u32 {
    let mut bits = 0;
    for byte in digest {
        if *byte == 0 {
            bits += 8;
        } else {
            bits += byte.leading_zeros();
            break;
        }
    }
    bits
}

pub fn verify_solution(challenge_id: u64, difficulty_bits: u32, nonce: u64) -> bool {
    difficulty_bits == 0 || leading_zero_bits(&puzzle_digest(challenge_id, nonce)) >= difficulty_bits
}

/// Smallest valid nonce, found by counting up from zero.
pub fn solve_minimal(challenge_id: u64, difficulty_bits: u32) -> u64 {
    (0..=u64::MAX)
        .find(|&n| verify_solution(challenge_id, difficulty_bits, n))
        .expect("nonce space exhausted")
}
