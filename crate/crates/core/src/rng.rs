//! Seed derivation. Every random stream in a run descends from the single
//! experiment seed through [`derive_seed`], so results never depend on
//! wall-clock time or OS entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep independent consumers of the experiment seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Data = 1,
    Partition = 2,
    Init = 3,
    Selection = 4,
    LocalTrain = 5,
    Baseline = 6,
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: Stream, parts: &[u64]) -> u64 {
    let mut h = mix(seed ^ mix(stream as u64));
    for &p in parts {
        h = mix(h ^ mix(p));
    }
    h
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: Stream, parts: &[u64]) -> ChaCha8Rng {
    seeded_rng(derive_seed(seed, stream, parts))
}
