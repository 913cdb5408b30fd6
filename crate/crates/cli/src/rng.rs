//! Stream splitting. Every unit of work (a generated item, one inference
//! run, one corruption draw) gets its own ChaCha8 generator keyed by the
//! command seed, a purpose tag and the unit index:
//! `ChaCha8Rng::seed_from_u64(seed ^ tag·0x9E3779B97F4A7C15)` on stream
//! `index`. Results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Generate = 0,
    Infer = 1,
    Corrupt = 2,
    Jitter = 3,
    Track = 4,
}

pub fn unit_rng(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (purpose as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

/// Generator for sub-unit `sub` of unit `index`, e.g. one corruption level
/// of one item.
pub fn sub_rng(seed: u64, purpose: Purpose, index: u64, sub: u64) -> ChaCha8Rng {
    unit_rng(seed.wrapping_add(sub.wrapping_mul(0xD1B5_4A32_D192_ED03)), purpose, index)
}
