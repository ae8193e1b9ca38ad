//! Deterministic seed derivation.
//!
//! Every random stream in a run is derived from the run seed plus a path of
//! labels (pool id, model id, tree index ...), so results do not depend on
//! scheduling order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes; stable across platforms and releases.
fn hash_label(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derive a child seed from a parent seed and an integer stream index.
pub fn derive(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index))
}

/// Derive a child seed from a parent seed and a string label.
pub fn derive_label(seed: u64, label: &str) -> u64 {
    derive(seed, hash_label(label))
}

/// Seeded, portable RNG used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
