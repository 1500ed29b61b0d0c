//! Small deterministic hashing helpers used for keyed RNG streams and cache keys.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// FNV-1a over raw bytes. Stable across platforms and toolchains.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive mix of a sequence of words into one seed.
pub fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x243f_6a88_85a3_08d3u64, |acc, &w| {
        splitmix64(acc ^ splitmix64(w))
    })
}

pub fn keyed_rng(words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(words))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Rounds to a fixed number of decimals so float noise cannot leak into
/// orderings, keys or serialized artifacts.
pub fn snap(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    let v = (x * s).round() / s;
    if v == 0.0 {
        0.0
    } else {
        v
    }
}
