//! Seeded random streams.
//!
//! Every random decision in a run is drawn from a ChaCha8 stream seeded with
//! `ChaCha8Rng::seed_from_u64`. ChaCha output is specified independently of
//! platform and word size, so a seed reproduces the same run everywhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type GpRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> GpRng {
    ChaCha8Rng::seed_from_u64(seed)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a list of labels.
///
/// `seed = splitmix64(master ^ fnv1a64(label_0 0x1f label_1 0x1f ...))`. The
/// labels are hashed with FNV-1a so the mapping is stable across Rust releases,
/// unlike `std::hash`.
pub fn derive_seed(master: u64, labels: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for (i, label) in labels.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    splitmix64(master ^ h)
}
