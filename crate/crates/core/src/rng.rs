//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from ChaCha8 keyed by a
//! 64-bit master seed. Distinct purposes use distinct ChaCha stream ids,
//! and positions inside a stream are addressed by word offset, so a draw
//! can be reproduced without replaying the draws before it.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream ids. Fixed forever: changing one changes every golden output.
pub mod streams {
    pub const INSTANCE: u64 = 0;
    pub const COST_BOUNDED: u64 = 1;
    pub const COST_DRIFT: u64 = 2;
    pub const COST_PERMUTATION: u64 = 3;
    pub const BOOTSTRAP: u64 = 4;
    pub const SAMPLING: u64 = 5;
}

/// A positioned ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Stream positioned at the `index`-th 64-bit draw.
    pub fn at(seed: u64, stream: u64, index: u64) -> Self {
        let mut s = Self::new(seed, stream);
        s.rng.set_word_pos(2 * index as u128);
        s
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..bound` by rejection, `bound > 0`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % bound;
            }
        }
    }
}
