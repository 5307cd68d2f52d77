//! Reproducible random streams.
//!
//! A [`SeededRng`] is a ChaCha8 generator keyed by a 64-bit seed and
//! positioned on a 64-bit stream. Different streams under one seed are
//! independent, so every (trial, generation) pair gets its own stream and
//! results do not depend on scheduling order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math::normal_quantile;

/// Stream-id domains, so that unrelated consumers of one seed never share a stream.
pub mod domain {
    pub const TRIAL: u64 = 0x7472_6961_6c00_0000;
    pub const CONSTRAINT: u64 = 0x636f_6e73_7400_0000;
    pub const KL: u64 = 0x6b6c_0000_0000_0000;
    pub const EM_INIT: u64 = 0x656d_0000_0000_0000;
    pub const TRAIN: u64 = 0x7472_6e00_0000_0000;
    pub const EVAL: u64 = 0x6576_616c_0000_0000;
    pub const INIT: u64 = 0x696e_6974_0000_0000;
    pub const PERMUTE: u64 = 0x7065_726d_0000_0000;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a tuple of ids into one stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5eed_0000_0000_0001, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    /// The stream used by Monte-Carlo trial `trial` at loop generation `generation`.
    pub fn for_trial(seed: u64, trial: u64, generation: u64) -> Self {
        Self::new(seed, stream_id(&[domain::TRIAL, trial, generation]))
    }

    /// A stream under the same seed addressed by `parts`.
    pub fn derive(&self, parts: &[u64]) -> Self {
        let mut all = alloc::vec::Vec::with_capacity(parts.len() + 1);
        all.push(self.stream);
        all.extend_from_slice(parts);
        Self::new(self.seed, stream_id(&all))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval (0, 1); safe to feed to inverse CDFs.
    pub fn open_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn fill_open_uniform(&mut self, out: &mut [f64]) {
        for u in out {
            *u = self.open_uniform();
        }
    }

    /// Standard normal by inversion, one uniform per draw.
    pub fn standard_normal(&mut self) -> f64 {
        normal_quantile(self.open_uniform())
    }

    /// Uniform integer in `0..n` (rejection sampling, no modulo bias).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
