//! Deterministic per-stage RNG derivation.
//!
//! Every randomized routine takes a master seed plus a stage label and
//! counter, so reordering stages or rerunning one of them never perturbs the
//! random stream of another.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 finalizer: bijective 64-bit mixing.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// FNV-1a hash of the stage label.
fn hash_label(label: &str) -> u64 {
    let mut h = 0xcbf29ce484222325_u64;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derive a child seed from master seed, stage label and counter.
pub fn derive(master: u64, stage: &str, counter: u64) -> u64 {
    let mut z = mix(master);
    z = mix(z ^ hash_label(stage));
    mix(z ^ counter)
}

/// RNG for one (stage, counter) slot.
pub fn rng(master: u64, stage: &str, counter: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive(master, stage, counter))
}
