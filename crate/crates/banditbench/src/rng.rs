//! Deterministic, labelled random streams.
//!
//! Every source of randomness in a run is a named sub-stream derived from the
//! run seed: `shuffle` for the unit permutation, `agent/...` for everything an
//! agent draws, `reward-noise` reserved for stochastic reward extensions.
//! Derivation hashes `(seed, label)` with SHA-256 into a ChaCha12 key, so the
//! same seed and label reproduce the same draw sequence on every platform,
//! and distinct labels behave as independent generators.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::num::Scalar;

/// 64-bit experiment seed. Sub-streams are derived from it by label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Derives a child seed for `label`. Chaining labels builds a path:
    /// `seed.derive("agent").derive("batch")`.
    pub fn derive(self, label: &str) -> RngSeed {
        assert!(!label.is_empty(), "stream label must be non-empty");
        let mut hasher = Sha256::new();
        hasher.update(b"seed/");
        hasher.update(self.0.to_le_bytes());
        hasher.update([0x1f]);
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut eight = [0u8; 8];
        eight.copy_from_slice(&digest[..8]);
        RngSeed(u64::from_le_bytes(eight))
    }

    /// Opens the draw stream for this seed.
    pub fn stream(self) -> RngStream {
        let mut hasher = Sha256::new();
        hasher.update(b"stream/");
        hasher.update(self.0.to_le_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        RngStream {
            rng: ChaCha12Rng::from_seed(key),
        }
    }
}

/// Derives the named sub-stream of `seed`. Same `(seed, label)` always yields
/// the same sequence; distinct labels yield unrelated sequences.
pub fn derive_stream(seed: RngSeed, label: &str) -> RngStream {
    seed.derive(label).stream()
}

/// A single-owner ChaCha12 draw stream.
///
/// ChaCha is a counter-mode generator with a fixed specification, so streams
/// are byte-identical across platforms and independent of the scalar type in
/// use.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// One standard-normal draw. Sampled in `f64` regardless of `S` so a stream
/// advances identically for every scalar type.
#[inline]
pub fn draw_standard_normal<S: Scalar>(rng: &mut impl Rng) -> S {
    S::of(rng.sample::<f64, _>(rand_distr::StandardNormal))
}

/// One Gamma(shape, scale) draw, sampled in `f64`.
pub fn draw_gamma<S: Scalar>(shape: S, scale: S, rng: &mut impl Rng) -> S {
    let gamma = rand_distr::Gamma::new(shape.as_(), scale.as_()).expect("gamma parameters are positive");
    S::of(rng.sample::<f64, _>(gamma))
}

/// One uniform draw in [0, 1), sampled in `f64`.
#[inline]
pub fn draw_uniform<S: Scalar>(rng: &mut impl Rng) -> S {
    S::of(rng.random_range(0.0..1.0))
}
