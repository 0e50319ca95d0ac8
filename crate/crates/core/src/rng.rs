//! Counter-based random streams.
//!
//! Every particle path draws from its own ChaCha8 stream, addressed by
//! `(seed, purpose, trial, particle)`. The outcome of a path therefore
//! depends only on its address, never on which worker ran it or in which
//! order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// What a stream is used for; streams with different purposes never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Path = 1,
    Thinning = 2,
    Cloud = 3,
    Bootstrap = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub purpose: Purpose,
    pub trial: u64,
    pub particle: u64,
}

const LANE_LIMIT: u64 = 1 << 32;

impl RngStream {
    pub fn new(seed: u64, purpose: Purpose, trial: u64, particle: u64) -> Result<Self> {
        if trial >= LANE_LIMIT || particle >= LANE_LIMIT {
            return Err(invalid("trial and particle indices must be below 2^32"));
        }
        Ok(Self {
            seed,
            purpose,
            trial,
            particle,
        })
    }

    /// Stream constructor for indices already known to be in range.
    pub(crate) fn at(seed: u64, purpose: Purpose, trial: u64, particle: u64) -> Self {
        debug_assert!(trial < LANE_LIMIT && particle < LANE_LIMIT);
        Self {
            seed,
            purpose,
            trial,
            particle,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8] = self.purpose as u8;
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream((self.trial << 32) | self.particle);
        rng
    }
}
