//! Seed derivation and the crate-wide random generator.
//!
//! Every random draw in the pipeline comes from [`StreamRng`], a ChaCha8
//! stream cipher generator. Its output is fixed by the ChaCha specification
//! and is identical on every platform. Independent streams (one per grid
//! layer, one per task, ...) are split off a base seed with [`derive_seed`],
//! which applies the SplitMix64 finalizer:
//!
//! ```text
//! z = base + 0x9E3779B97F4A7C15 * (stream + 1)
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! All arithmetic is wrapping 64-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

/// Derive the seed of sub-stream `stream` from `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(GOLDEN_GAMMA.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

/// Derive a seed from a path of stream indices, e.g. `[layer, row, col]`.
pub fn derive_seed_path(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(base, |acc, &s| derive_seed(acc, s))
}

pub fn rng(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
