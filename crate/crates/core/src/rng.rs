//! Seeded random streams addressed by `(seed, replicate)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable per-replicate seed derived from a root seed and an index.
pub fn derive_seed(root: u64, replicate: u64) -> u64 {
    mix64(root ^ mix64(replicate.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

const TWO_POW_MINUS_53: f64 = 1.0 / (1u64 << 53) as f64;

/// ChaCha8 stream for one replicate.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    replicate: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, replicate: u64) -> Self {
        Self {
            seed,
            replicate,
            inner: ChaCha8Rng::seed_from_u64(derive_seed(seed, replicate)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * TWO_POW_MINUS_53
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * TWO_POW_MINUS_53
    }

    /// Exponential variate by inverse transform.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform_open().ln() / rate
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
