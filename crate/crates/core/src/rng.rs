//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream whose 256-bit key is
//! built from a master seed and a path of integer stream identifiers:
//!
//! 1. `state = master`
//! 2. for each id in the path: `state = splitmix64(state ^ splitmix64(id + 0x9E3779B97F4A7C15))`
//! 3. the key is four consecutive splitmix64 outputs seeded with `state`,
//!    written little-endian.
//!
//! ChaCha8 is counter based, so a stream's output depends only on its key.
//! Work items that run in parallel each get their own path and never share
//! generator state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One step of the SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |state, &id| {
        splitmix64(state ^ splitmix64(id.wrapping_add(GOLDEN)))
    })
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    let mut state = derive_seed(master, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stream tags, so that e.g. event sampling and waveform rendering never
/// consume from the same generator.
pub mod tag {
    pub const COHORT: u64 = 1;
    pub const EVENTS: u64 = 2;
    pub const WAVEFORM: u64 = 3;
    pub const SENSOR_NOISE: u64 = 4;
    pub const CONTROL: u64 = 5;
    pub const MIXING: u64 = 6;
    pub const PERMUTATION: u64 = 7;
    pub const QUANTIZER: u64 = 8;
    pub const DAY: u64 = 9;
    pub const ROTATION: u64 = 10;
}
