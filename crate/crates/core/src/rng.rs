//! Named random streams derived from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a label into a seed. Stable across platforms and releases.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    // FNV-1a over the label bytes, then avalanche with the root.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(root ^ splitmix64(h))
}

pub fn derive_seed_parts(root: u64, parts: &[&str]) -> u64 {
    parts.iter().fold(root, |acc, p| derive_seed(acc, p))
}

pub fn stream(root: u64, label: &str) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(root, label))
}

pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
