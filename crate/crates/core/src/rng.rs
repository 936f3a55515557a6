//! Seeded random streams.
//!
//! Every random quantity in the crate comes from a [`Stream`], a ChaCha8
//! counter-based generator keyed by a 64-bit seed and a 64-bit stream id.
//! Seeds for sub-tasks are derived with [`derive_seed`], a SplitMix64 chain
//! over the parent seed and a list of labels, so any cell of an experiment
//! grid can be recomputed in isolation.
//!
//! Gaussian variates use the Box–Muller transform on the uniform stream.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed: `h = splitmix64(parent)`, then for each label
/// `h = splitmix64(h ^ splitmix64(label))`.
pub fn derive_seed(parent: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(parent), |h, &l| splitmix64(h ^ splitmix64(l)))
}

/// Labels used when splitting seeds; kept in one place so derived seeds stay stable.
pub mod label {
    pub const BETA: u64 = 1;
    pub const FROZEN_W: u64 = 2;
    pub const CELL: u64 = 3;
    pub const DATASET: u64 = 10;
    pub const INIT: u64 = 11;
    pub const BATCHES: u64 = 12;
    pub const MONTE_CARLO: u64 = 13;
    pub const REFERENCE: u64 = 20;
    pub const EMPIRICAL: u64 = 21;
}

/// A uniform/Gaussian stream over ChaCha8.
#[derive(Clone, Debug)]
pub struct Stream {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Stream `id` of the generator keyed by `seed`; distinct ids are independent.
    pub fn with_stream(seed: u64, id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(id);
        Self { inner, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Standard normal via Box–Muller; the second variate of each pair is cached.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64], std: f64) {
        for v in out {
            *v = std * self.gaussian();
        }
    }
}
