//! Seeded random streams.
//!
//! Every stream is a ChaCha20 generator keyed with `seed_from_u64(seed)` and
//! pinned to a purpose-specific stream id ([`StreamPurpose`]), so frequency
//! draws and dataset draws never share state: changing the feature count
//! leaves generated datasets untouched.
//!
//! Uniform variates take the top 53 bits of `next_u64`. Gaussian variates use
//! the Box-Muller transform: from `u1 = (k1 + 1) / 2^53` and `u2 = k2 / 2^53`,
//! `r = sqrt(-2 ln u1)` and `z0 = r cos(2 pi u2)`, `z1 = r sin(2 pi u2)`.
//! `z0` is returned first and `z1` is served by the next call.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

const TWO_POW_53: f64 = 9_007_199_254_740_992.0;

/// Stream ids, one per consumer of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Frequencies = 1,
    Data = 2,
}

#[derive(Debug, Clone)]
pub struct SeededStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl SeededStream {
    pub fn new(seed: u64, purpose: StreamPurpose) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(purpose as u64);
        Self { rng, spare: None }
    }

    fn bits53(&mut self) -> u64 {
        self.rng.next_u64() >> 11
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.bits53() as f64 / TWO_POW_53
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open_low(&mut self) -> f64 {
        (self.bits53() + 1) as f64 / TWO_POW_53
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open_low();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(r * angle.sin());
        r * angle.cos()
    }
}
