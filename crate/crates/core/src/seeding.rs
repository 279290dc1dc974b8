//! Deterministic RNG stream derivation.
//!
//! Every stochastic component draws from a ChaCha stream keyed by the root
//! seed, a purpose tag and two free indices. Results are therefore
//! reproducible regardless of thread scheduling: workers never share RNG
//! state, they derive their own stream from the coordinates of the task.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived streams. Values are arbitrary but fixed.
pub mod purpose {
    pub const CONFIG_SAMPLING: u64 = 1;
    pub const PATTERN_SAMPLING: u64 = 2;
    pub const DEVICE_TARGET: u64 = 3;
    pub const DEVICE_BASIS: u64 = 4;
    pub const SPMC: u64 = 5;
    pub const TRAJECTORY: u64 = 6;
    pub const SHOTS: u64 = 7;
    pub const REPEAT: u64 = 8;
    pub const TEST: u64 = 99;
}

/// Independent RNG stream for (`root`, `tag`, `a`, `b`).
pub fn stream(root: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&root.to_le_bytes());
    seed[8..16].copy_from_slice(&tag.to_le_bytes());
    seed[16..24].copy_from_slice(&a.to_le_bytes());
    seed[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Derives a child root seed, for nesting whole sub-experiments.
pub fn child_seed(root: u64, tag: u64, index: u64) -> u64 {
    // SplitMix64 over the mixed words.
    let mut s = root
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(tag.rotate_left(17))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    s ^= s >> 30;
    s = s.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    s ^= s >> 27;
    s = s.wrapping_mul(0x94d0_49bb_1331_11eb);
    s ^ (s >> 31)
}
