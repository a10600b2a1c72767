//! Seeded randomness for the simulated network.
//!
//! The generator is xoshiro256** (Blackman and Vigna). Its state is expanded
//! from the 64-bit seed with SplitMix64 (increment 0x9E3779B97F4A7C15,
//! multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB); each output is
//! `rotl(s1 * 5, 7) * 9`. Both come from `rand_xoshiro`; the sampling
//! helpers below are written out so that traces can be reproduced elsewhere.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

#[derive(Debug, Clone)]
pub struct SimRng(Xoshiro256StarStar);

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// A double in [0, 1) from the top 53 bits of one output.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// True with probability `p`. Always draws one output.
    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Uniform in `lo..=hi` by reduction modulo the span. Always draws one
    /// output, even when the span is a single value.
    pub fn between(&mut self, lo: u64, hi: u64) -> u64 {
        let v = self.next_u64();
        match (hi - lo).checked_add(1) {
            Some(span) => lo + v % span,
            None => v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SimRng::new(42);
        let mut b = SimRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(SimRng::new(1).next_u64(), SimRng::new(2).next_u64());
    }

    #[test]
    fn bounds() {
        let mut r = SimRng::new(7);
        for _ in 0..1000 {
            let v = r.between(3, 5);
            assert!((3..=5).contains(&v));
            let u = r.unit();
            assert!((0.0..1.0).contains(&u));
        }
        assert!(!r.chance(0.0));
        assert!(r.chance(1.0));
        assert_eq!(r.between(4, 4), 4);
    }
}
