//! Seed derivation and the simulation generator.
//!
//! Every stream in the engine is derived from a master seed by walking a path
//! of indices (`derive_seed(derive_seed(master, pair), episode)` and so on), so
//! the draws consumed by one episode never depend on how many other episodes
//! ran before it or on which thread.

use rand::SeedableRng;

/// Generator used by environments, agents and training.
pub type SimRng = rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed number `index` of `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_mul(GOLDEN_GAMMA) ^ 0xD1B5_4A32_D192_ED03))
}

/// Seed reached by following `path` from `master`.
pub fn derive_path(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |seed, &i| derive_seed(seed, i))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        let c = derive_seed(8, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, 0));
        assert_eq!(derive_path(7, &[0, 1]), derive_seed(derive_seed(7, 0), 1));
    }

    #[test]
    fn generator_is_reproducible() {
        let mut r1 = rng_from_seed(42);
        let mut r2 = rng_from_seed(42);
        for _ in 0..100 {
            assert_eq!(r1.gen::<u64>(), r2.gen::<u64>());
        }
    }
}
