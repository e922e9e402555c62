//! Seedable, portable random number generation.
//!
//! The generator is ChaCha with 8 rounds (`rand_chacha::ChaCha8Rng`): a
//! counter-based stream cipher core whose output is specified exactly by
//! RFC 8439, so a given seed produces the same byte stream on every
//! platform and in every process. Floating-point draws use the top 53 bits
//! of one `u64`, mapped to `[0, 1)` as `(x >> 11) * 2^-53`; the integer
//! core is bit-exact and the mapping is fixed here rather than inherited
//! from a helper crate.
//!
//! A single `Rng` must not be shared between threads; callers that want
//! parallel streams split off children with [`Rng::child`].

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::{Error, Result};

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Deterministic random number generator.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    /// Seed from a 64-bit value.
    pub fn new(seed: u64) -> Self {
        Rng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw in `[0, 1)`, consuming exactly one 64-bit word of the
    /// underlying stream.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform draw in `[lo, hi)`.
    #[inline]
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Bernoulli draw; consumes exactly one uniform regardless of `p`.
    /// Errors if `p` lies outside `[0, 1]`.
    pub fn bernoulli(&mut self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(self.uniform() < p)
    }

    /// Bernoulli draw for probabilities that are already known to lie in
    /// `[0, 1]` (sigmoid or softmax outputs).
    #[inline]
    pub(crate) fn flip(&mut self, p: f64) -> bool {
        debug_assert!((0.0..=1.0).contains(&p));
        self.uniform() < p
    }

    /// Categorical draw from an (approximately normalized) probability
    /// vector, consuming one uniform. Rounding deficits fall to the last
    /// index.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        assert!(!probs.is_empty(), "categorical: empty probability vector");
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }

    /// Random integer in `[0, n)`, consuming one uniform.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below: n must be positive");
        let i = (self.uniform() * n as f64) as usize;
        i.min(n - 1)
    }

    /// Split off an independent child generator, advancing this one by one
    /// draw. Used to give each Gibbs chain or worker its own stream.
    pub fn child(&mut self) -> Rng {
        Rng::new(self.inner.next_u64())
    }

    /// Serializable state: the 32-byte seed and the 128-bit word position.
    pub fn state(&self) -> ([u8; 32], u128) {
        (self.inner.get_seed(), self.inner.get_word_pos())
    }

    /// Restore a generator from [`Rng::state`] output.
    pub fn from_state(seed: [u8; 32], word_pos: u128) -> Self {
        let mut inner = ChaCha8Rng::from_seed(seed);
        inner.set_word_pos(word_pos);
        Rng { inner }
    }
}
