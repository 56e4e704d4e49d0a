//! Reproducible random streams.
//!
//! Every trajectory owns a ChaCha8 stream selected by `(master_seed, index)`:
//! the seed fixes the key and the trajectory index selects the stream, so a
//! trajectory draws the same normals no matter which worker runs it or in
//! what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrajectoryRng = ChaCha8Rng;

pub fn trajectory_rng(master_seed: u64, index: u64) -> TrajectoryRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// SplitMix64 finalizer applied to `master ⊕ golden·(index+1)`; used to key
/// sweep rows by index rather than by position in a sequence.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
