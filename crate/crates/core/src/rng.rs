//! Seed derivation. Every random decision is keyed on a 64-bit seed mixed with
//! a stable key (row index, node path, candidate variable), so results never
//! depend on iteration or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer applied to `seed ^ key`-style combinations.
pub fn mix(seed: u64, key: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(key.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child below a node with seed `seed`.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    mix(seed, index.wrapping_add(0x5851_F42D_4C95_7F2D))
}

pub fn rng_for(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row indices `0..n` ordered by their keyed hash. The order of a given row
/// depends only on `(seed, row)`.
pub fn keyed_order(seed: u64, n: usize) -> Vec<usize> {
    let mut keyed: Vec<(u64, usize)> = (0..n).map(|i| (mix(seed, i as u64), i)).collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Exactly `k` distinct indices out of `0..n` (all of them when `k >= n`),
/// returned in increasing order.
pub fn subsample(seed: u64, n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut chosen = keyed_order(seed, n);
    chosen.truncate(k);
    chosen.sort_unstable();
    chosen
}
