//! Seeding discipline: every stochastic operation takes an explicit `u64`
//! seed and builds its own generator, so results never depend on call order
//! or thread scheduling. Parallel loops derive one independent seed per task
//! index with [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout: ChaCha8, seeded from a single `u64`.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer over (seed, tag); decorrelates per-task streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(tag.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Two-level stream derivation for nested task loops.
pub fn derive_seed2(seed: u64, tag_a: u64, tag_b: u64) -> u64 {
    derive_seed(derive_seed(seed, tag_a), tag_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derivation_is_stable_and_spread() {
        assert_eq!(derive_seed(42, 0), derive_seed(42, 0));
        assert_ne!(derive_seed(42, 0), derive_seed(42, 1));
        assert_ne!(derive_seed(42, 0), derive_seed(43, 0));
        // low-entropy tags must not collide over a realistic task range
        let mut seen = std::collections::HashSet::new();
        for tag in 0..10_000u64 {
            assert!(seen.insert(derive_seed(7, tag)));
        }
    }

    #[test]
    fn generator_reproducible() {
        let mut a = rng_from_seed(123);
        let mut b = rng_from_seed(123);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
