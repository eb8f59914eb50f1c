//! Reproducible random streams.
//!
//! A stream is addressed by `(master_seed, stream_id)`. The underlying
//! generator is ChaCha8 keyed by the master seed, with the stream id
//! selecting one of its 2^64 independent streams, so trial `t` of a study
//! sees the same numbers no matter which thread runs it or in what order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub stream_id: u64,
}

/// A seeded random stream owned by one worker at a time.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: StreamKey,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            key: StreamKey {
                master_seed,
                stream_id,
            },
            rng,
        }
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Derive a stream for a sub-task. Sub-streams of different parents
    /// never collide because the child id mixes the parent id with `tag`.
    pub fn derive(master_seed: u64, stream_id: u64, tag: u64) -> Self {
        Self::new(master_seed ^ splitmix64(tag.wrapping_add(0x9e37_79b9)), stream_id)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// SplitMix64 finalizer, used to spread small integer tags over the seed space.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let m = 200_000;
        let mut a = RngStream::new(11, 0);
        let mut b = RngStream::new(11, 1);
        let mut sum = 0.0;
        for _ in 0..m {
            sum += a.standard_normal() * b.standard_normal();
        }
        let corr = sum / m as f64;
        // SE of the mean product of independent unit normals is 1/sqrt(m).
        assert!(corr.abs() < 4.0 / (m as f64).sqrt(), "corr = {corr}");
    }

    #[test]
    fn derived_streams_differ_from_parent() {
        let mut a = RngStream::new(5, 2);
        let mut b = RngStream::derive(5, 2, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
