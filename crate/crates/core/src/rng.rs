//! Deterministic random streams.
//!
//! [`RngStream`] wraps ChaCha8, a counter-based generator: the 64-bit seed
//! selects the key and a 64-bit stream id selects an independent keystream.
//! Replication `k` of an experiment with base seed `s` uses seed `s + k`, and
//! each replication splits into named substreams (data, sketches) by stream id.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Position in the keystream, in 32-bit words.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn uniform_index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal<T: Real>(&mut self) -> T {
        T::of(self.inner.sample::<f64, _>(StandardNormal))
    }

    pub fn normal_vec<T: Real>(&mut self, n: usize) -> Vec<T> {
        (0..n).map(|_| self.standard_normal()).collect()
    }
}
