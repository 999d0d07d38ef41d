//! Hierarchical, order-independent random streams.
//!
//! A [`StreamKey`] names a point in the (run, agent, epoch/time, arm)
//! hierarchy. Splitting a key is a pure hash, so the stream an agent sees
//! for a given epoch never depends on which thread got there first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Labels for the top-level branches of a run's stream tree.
pub mod labels {
    pub const INSTANCE: u64 = 0x1157;
    pub const ADVERSARY_SET: u64 = 0xAD5E;
    pub const AGENT: u64 = 0xA6E7;
    pub const SERVER: u64 = 0x5E7E;
    pub const CONTEXT: u64 = 0xC07E;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(splitmix64(seed ^ 0x5EED_0000_0000_0001))
    }

    pub fn split(self, label: u64) -> Self {
        StreamKey(splitmix64(self.0 ^ splitmix64(label.wrapping_add(0x632B_E59B_D9B4_E019))))
    }

    pub fn split2(self, a: u64, b: u64) -> Self {
        self.split(a).split(b)
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn stream(self) -> RngStream {
        RngStream { rng: ChaCha8Rng::seed_from_u64(self.0) }
    }
}

/// A sequential generator owned by exactly one consumer.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

impl rand::RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_same_key_same_stream() {
        let k = StreamKey::root(7).split2(3, 11);
        let a: Vec<f64> = {
            let mut s = k.stream();
            (0..5).map(|_| s.normal()).collect()
        };
        let b: Vec<f64> = {
            let mut s = k.stream();
            (0..5).map(|_| s.normal()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn test_split_is_label_sensitive() {
        let root = StreamKey::root(1);
        assert_ne!(root.split(0), root.split(1));
        assert_ne!(root.split2(1, 2), root.split2(2, 1));
        assert_ne!(StreamKey::root(1), StreamKey::root(2));
    }
}
