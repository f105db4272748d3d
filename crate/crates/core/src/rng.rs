//! Seeded, stream-partitioned random number generation.
//!
//! Every stochastic process in a run (arrivals, channel, policy
//! exploration, ...) owns its own stream, so toggling one process never
//! perturbs the draws of another. An identical `(seed, stream_id)` pair
//! yields a bit-identical draw sequence on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Conventional stream ids for the processes common to all scenarios.
/// Scenarios derive per-node streams as `base + node_id * NODE_STRIDE`.
pub mod streams {
    pub const ARRIVALS: u64 = 0;
    pub const CHANNEL: u64 = 1;
    pub const POLICY: u64 = 2;
    pub const ENERGY: u64 = 3;
    pub const PLACEMENT: u64 = 4;
    /// Stride between per-node stream blocks.
    pub const NODE_STRIDE: u64 = 16;
}

/// Deterministic RNG bound to one (seed, stream) pair.
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Bernoulli draw; `prob` must already be validated to `[0, 1]`.
    pub fn bernoulli(&mut self, prob: f64) -> bool {
        self.next_f64() < prob
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.inner.gen_range(0..n)
    }
}

impl RngCore for SimRng {
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
