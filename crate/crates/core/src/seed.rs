//! Deterministic random streams keyed by (seed, labels, indices).
//!
//! Every parallel work item draws from its own stream so results never
//! depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a string (FNV-1a followed by a splitmix finalizer).
pub fn hash_label(label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    splitmix(h)
}

/// Combine a base seed with a sequence of keys.
pub fn derive(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix(seed), |acc, &k| splitmix(acc ^ splitmix(k)))
}

pub fn stream(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, keys))
}
