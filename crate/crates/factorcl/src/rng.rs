//! Seeded stream derivation.
//!
//! Every randomized component draws from a ChaCha stream derived from one
//! experiment seed plus a string label, so independent modules (data
//! generation, weight init, batch sampling, probes) get independent streams
//! that never shift when an unrelated component adds or removes draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the label bytes; stable across runs and platforms.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derive the RNG stream `label` of experiment `seed`.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(label));
    rng
}
