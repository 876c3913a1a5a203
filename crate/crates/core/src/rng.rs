//! Seeded random streams.
//!
//! Every stochastic operation draws from a [`Stream`] built from a `u64`
//! seed. Streams are ChaCha8 keyed by the seed, so the `n`-th draw is a pure
//! function of `(seed, n)`. Independent sub-seeds come from [`derive_seed`],
//! which reads a separate ChaCha stream (nonce = index) under a domain-tagged
//! key; that keeps batch and per-scene results independent of execution order.

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};

const SPLIT_DOMAIN: u64 = 0x5eed_5b11_7000_0001;

#[derive(Debug, Clone)]
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`; `bound` must be positive.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        // Lemire's multiply-and-reject; exact uniformity.
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let wide = u128::from(self.next_u64()) * u128::from(bound);
            if (wide as u64) >= threshold {
                return (wide >> 64) as u64;
            }
        }
    }

    /// Draws an index from non-negative weights by inverse CDF.
    pub fn pick(&mut self, weights: &[f64]) -> usize {
        inverse_cdf(weights, self.next_f64())
    }
}

/// The `index`-th child seed of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_DOMAIN);
    rng.set_stream(index);
    rng.next_u64()
}

/// Maps `u ∈ [0, 1)` to the first positive-weight index whose cumulative
/// weight reaches `u · total`. A draw landing exactly on a CDF boundary
/// resolves to the lower index; zero-weight entries are never returned.
pub fn inverse_cdf(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target <= acc {
                return i;
            }
        }
    }
    last_positive
}
