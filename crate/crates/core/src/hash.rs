//! Portable 64-bit hashing used for sketch hash functions and seed derivation.

use crate::graph::Label;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of one hash function, derived from a sketch seed and the
/// (component, row) coordinates of the function inside the sketch.
#[inline]
pub fn function_key(seed: u64, component: u32, row: u32) -> u64 {
    let coords = ((component as u64) << 32) | row as u64;
    mix64(mix64(seed.wrapping_add(GOLDEN)) ^ mix64(coords.wrapping_add(GOLDEN.rotate_left(17))))
}

/// Hashes a token sequence under `key`. Tokens are consumed as their 32-bit
/// ids in sequence order, with the length folded in first so that sequences
/// of different lengths are never confused.
#[inline]
pub fn hash_tokens(key: u64, tokens: &[Label]) -> u64 {
    let mut h = key ^ (tokens.len() as u64).wrapping_mul(GOLDEN);
    for t in tokens {
        h = mix64(h ^ (t.0 as u64 + 1).wrapping_mul(GOLDEN));
    }
    mix64(h)
}
