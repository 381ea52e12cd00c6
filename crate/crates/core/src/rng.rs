//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, stream, counter)`. The generator is ChaCha8
//! keyed from `seed` (rand_core's `seed_from_u64` expansion), with the ChaCha
//! stream id set to `stream` and `counter` the 32-bit word position inside the
//! keystream. Any stream state can therefore be saved as three integers and
//! restored bit-exactly on any platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

/// Well-known stream ids. Each consumer of randomness owns exactly one.
pub mod streams {
    pub const RESET: u64 = 0;
    pub const INIT: u64 = 1;
    pub const EXPLORATION_NOISE: u64 = 2;
    pub const TARGET_NOISE: u64 = 3;
    pub const REPLAY: u64 = 4;
    pub const MODE_SELECTION: u64 = 5;
    pub const MINIBATCH: u64 = 6;
    pub const WARMUP: u64 = 7;
}

/// Serializable position of a [`CounterRng`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    /// 32-bit word position in the keystream.
    pub counter: u64,
}

#[derive(Clone, Debug)]
pub struct CounterRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        CounterRng { seed, stream, inner }
    }

    pub fn from_state(state: RngState) -> Self {
        let mut rng = CounterRng::new(state.seed, state.stream);
        rng.inner.set_word_pos(state.counter as u128);
        rng
    }

    pub fn state(&self) -> RngState {
        RngState { seed: self.seed, stream: self.stream, counter: self.inner.get_word_pos() as u64 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` (multiply-shift; bias below 2^-64 · n).
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box–Muller; consumes two uniforms per call.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }
}

/// SplitMix64 finalizer, used to derive per-episode seeds from a run seed.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th training episode. Always even.
pub fn training_episode_seed(run_seed: u64, index: u64) -> u64 {
    mix64(mix64(run_seed) ^ index) << 1
}

/// Seed of the `index`-th evaluation episode. Always odd, hence disjoint
/// from every training seed.
pub fn eval_episode_seed(run_seed: u64, index: u64) -> u64 {
    (mix64(mix64(run_seed ^ 0x5EED_E7A1) ^ index) << 1) | 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_roundtrip_is_exact() {
        let mut a = CounterRng::new(42, streams::REPLAY);
        for _ in 0..37 {
            a.next_u64();
        }
        let mut b = CounterRng::from_state(a.state());
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = CounterRng::new(1, 0);
        let mut b = CounterRng::new(1, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = CounterRng::new(3, 0);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(7) < 7);
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = CounterRng::new(9, 2);
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = r.normal();
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn train_and_eval_seeds_disjoint() {
        for i in 0..1000 {
            assert_eq!(training_episode_seed(5, i) & 1, 0);
            assert_eq!(eval_episode_seed(5, i) & 1, 1);
        }
    }
}
