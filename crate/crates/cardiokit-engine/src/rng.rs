//! Named-stream counter-based RNG.
//!
//! Every consumer of randomness (init, dropout, masking, sampling, shuffling)
//! gets its own stream derived from the run seed and a stream name, so runs
//! are reproducible and streams can be handed to parallel workers without
//! coupling their draws. Floating-point conversion is done here rather than
//! through distribution adapters so the bit stream is stable across
//! dependency upgrades.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl StreamRng {
    pub fn named(seed: u64, stream: &str) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(fnv1a(stream.as_bytes()));
        StreamRng { inner }
    }

    /// Derives a further stream, e.g. one per worker or per epoch.
    pub fn substream(&self, seed: u64, tag: u64) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(seed ^ tag.rotate_left(17));
        inner.set_stream(self.inner.get_stream().wrapping_add(tag | 1));
        StreamRng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn uniform_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform<S: Scalar>(&mut self) -> S {
        S::fromf(self.uniform_f64())
    }

    /// Standard normal via Box-Muller (one draw per call).
    pub fn normal_f64(&mut self) -> f64 {
        let u1 = self.uniform_f64().max(f64::MIN_POSITIVE);
        let u2 = self.uniform_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn normal<S: Scalar>(&mut self) -> S {
        S::fromf(self.normal_f64())
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform_f64() < p
    }

    /// Uniform index in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        (self.uniform_f64() * n as f64) as usize % n
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = StreamRng::named(7, "dropout");
        let mut b = StreamRng::named(7, "dropout");
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_names_differ() {
        let mut a = StreamRng::named(7, "dropout");
        let mut b = StreamRng::named(7, "masking");
        assert_ne!(
            (0..8).map(|_| a.next_u64()).collect::<Vec<_>>(),
            (0..8).map(|_| b.next_u64()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn uniform_in_range_and_normal_centered() {
        let mut rng = StreamRng::named(3, "stats");
        let mut sum = 0.0;
        for _ in 0..10_000 {
            let u = rng.uniform_f64();
            assert!((0.0..1.0).contains(&u));
            sum += rng.normal_f64();
        }
        assert!((sum / 10_000.0).abs() < 0.05);
    }
}
