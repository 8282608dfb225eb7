//! Deterministic randomness.
//!
//! Two independent sources feed every replica:
//!
//! * a counter-based pseudo-random function that maps `(key, edge)` to a uniform in `[0, 1)`
//!   without any state, so edge states are consistent across an unbounded vertex set, and
//! * a per-replica walk stream ([`WalkRng`]) seeded from `(master_seed, replica, tag)`.
//!
//! Domain tags keep the two families of keys disjoint, which realizes the product of the walk
//! law and the Bernoulli bond measure.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Domain tag for percolation edge keys.
pub const TAG_PERCOLATION: u64 = 0x7065_7263_6f6c_6174;
/// Domain tag for the (first) walk stream.
pub const TAG_WALK: u64 = 0x7761_6c6b_0000_0001;
/// Domain tag for a second, independent walk from the same replica.
pub const TAG_WALK_SECOND: u64 = 0x7761_6c6b_0000_0002;
/// Domain tag for auxiliary walks (escape probabilities, return times).
pub const TAG_AUX: u64 = 0x6175_7800_0000_0001;

/// Domain tag for return-time walks.
pub const TAG_RETURN: u64 = 0x7265_7475_726e_0001;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a bijection on `u64` with full avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a running key with one more word.
#[inline]
pub fn absorb(key: u64, word: u64) -> u64 {
    mix64(key ^ mix64(word.wrapping_add(GOLDEN)))
}

/// Key for the stream identified by `(master_seed, replica, tag)`.
pub fn derive_key(master_seed: u64, replica: u64, tag: u64) -> u64 {
    absorb(absorb(mix64(tag), master_seed), replica)
}

/// Maps the top 53 bits of a word to `[0, 1)`.
#[inline]
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Walk randomness: Xoshiro256++ with a bit reservoir so that power-of-two choices
/// (the `±1` step on `Z`, the four directions of `Z^2`) consume only the bits they need.
#[derive(Clone, Debug)]
pub struct WalkRng {
    inner: Xoshiro256PlusPlus,
    bits: u64,
    available: u32,
}

impl WalkRng {
    pub fn new(master_seed: u64, replica: u64, tag: u64) -> Self {
        Self::from_key(derive_key(master_seed, replica, tag))
    }

    pub fn from_key(key: u64) -> Self {
        Self { inner: Xoshiro256PlusPlus::seed_from_u64(key), bits: 0, available: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.inner.next_u64())
    }

    /// Next `k` bits (`1 <= k <= 32`), least significant first, with exact sequential
    /// semantics: eight calls of `next_bits(1)` yield the same bits as one `next_bits(8)`.
    #[inline]
    pub fn next_bits(&mut self, k: u32) -> u64 {
        debug_assert!((1..=32).contains(&k));
        if self.available >= k {
            let out = self.bits & ((1u64 << k) - 1);
            self.bits >>= k;
            self.available -= k;
            return out;
        }
        let have = self.available;
        let low = self.bits;
        let fresh = self.inner.next_u64();
        let need = k - have;
        let high = fresh & ((1u64 << need) - 1);
        self.bits = fresh >> need;
        self.available = 64 - need;
        low | (high << have)
    }

    #[inline]
    pub fn next_bit(&mut self) -> bool {
        self.next_bits(1) == 1
    }

    /// Uniform integer in `0..n`; power-of-two `n` draws bits, other sizes use
    /// Lemire's widening-multiply rejection on a fresh word.
    #[inline]
    pub fn below(&mut self, n: u32) -> u32 {
        debug_assert!(n > 0);
        if n.is_power_of_two() {
            if n == 1 {
                return 0;
            }
            return self.next_bits(n.trailing_zeros()) as u32;
        }
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.inner.next_u64() >> 32) * n as u64;
            if (m as u32) >= threshold {
                return (m >> 32) as u32;
            }
        }
    }

    /// Uniform index in `0..n` for sizes that may exceed `u32`.
    pub fn below_usize(&mut self, n: usize) -> usize {
        if n <= u32::MAX as usize {
            self.below(n as u32) as usize
        } else {
            (self.inner.next_u64() % n as u64) as usize
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_reservoir_is_sequential() {
        let mut a = WalkRng::new(1, 2, TAG_WALK);
        let mut b = a.clone();
        for _ in 0..50 {
            let byte = a.next_bits(8);
            let mut expect = 0;
            for i in 0..8 {
                expect |= b.next_bits(1) << i;
            }
            assert_eq!(byte, expect);
        }
        // Mixed widths straddling a refill.
        let mut c = WalkRng::new(9, 9, TAG_WALK);
        let mut d = c.clone();
        let _ = c.next_bits(3);
        let _ = d.next_bits(3);
        for _ in 0..40 {
            let x = c.next_bits(5);
            let mut y = 0;
            for i in 0..5 {
                y |= d.next_bits(1) << i;
            }
            assert_eq!(x, y);
        }
    }

    #[test]
    fn below_is_in_range_and_roughly_uniform() {
        let mut rng = WalkRng::new(3, 0, TAG_AUX);
        let mut counts = [0u32; 6];
        for _ in 0..60_000 {
            counts[rng.below(6) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0, "{counts:?}");
        }
        for n in [1u32, 2, 4, 26, 1000] {
            for _ in 0..100 {
                assert!(rng.below(n) < n);
            }
        }
    }

    #[test]
    fn distinct_tags_give_distinct_streams() {
        let mut a = WalkRng::new(5, 0, TAG_WALK);
        let mut b = WalkRng::new(5, 0, TAG_WALK_SECOND);
        assert_ne!(a.next_u64(), b.next_u64());
        assert_ne!(derive_key(5, 0, TAG_WALK), derive_key(5, 1, TAG_WALK));
    }
}
