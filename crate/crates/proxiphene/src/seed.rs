//! Deterministic RNG derivation.
//!
//! Every stochastic component draws from a ChaCha8 stream whose key is
//! SHA-256 of the run seed and a purpose label. Components therefore stay
//! bit-reproducible independently of each other: adding draws in one place
//! never shifts the stream seen by another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives an independent RNG for `purpose` from the run seed.
///
/// Labels are free-form; by convention they are slash-separated paths such as
/// `"synth/participant/12"` or `"hblr/chain/3"`.
pub fn derived_rng(seed: u64, purpose: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(purpose.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(key)
}

/// Derives a child seed for a component that takes a plain `u64`.
pub fn derived_seed(seed: u64, purpose: &str) -> u64 {
    use rand::Rng;
    derived_rng(seed, purpose).random()
}
