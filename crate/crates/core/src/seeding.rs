//! Deterministic seed derivation.
//!
//! All randomness descends from one master seed. A child seed is derived from
//! the master and a textual key (usually a module name, optionally suffixed
//! with an index) by FNV-1a hashing the key and mixing it with the master
//! through SplitMix64. Streams for parallel workers use ChaCha's stream id so
//! that worker `k` always sees the same numbers regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `key` under `master`.
pub fn derive(master: u64, key: &str) -> u64 {
    splitmix64(master ^ fnv1a(key.as_bytes()))
}

/// Generator for worker `stream` of a seed.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
