//! Seeded random streams.
//!
//! Every stochastic step (weight init, dropout, shuffling, sampling, corpus
//! synthesis) draws from its own [`RngState`]. The generator is ChaCha8 from
//! `rand_chacha`; a stream is identified by `(seed, stream id)` and maps onto
//! ChaCha's native 64-bit stream selector, so named sub-streams never overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name of the generator backing every stream.
pub const ALGORITHM: &str = "chacha8";

/// Well-known sub-stream ids fanned out from a single run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Shuffle = 3,
    Synthesis = 4,
    Sample = 5,
}

#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn named(seed: u64, stream: Stream) -> Self {
        Self::with_stream(seed, stream as u64)
    }

    /// Child stream keyed by `index`, e.g. one dropout stream per training example.
    pub fn fork(&self, index: u64) -> Self {
        let seed = self.seed ^ self.stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        Self::with_stream(seed, index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.gen::<f64>()
    }

    pub fn next_f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.rng);
    }

    /// Index drawn proportionally to `weights` (non-negative, not all zero).
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut x = self.next_f64() * total;
        for (i, &w) in weights.iter().enumerate() {
            if x < w {
                return i;
            }
            x -= w;
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}
