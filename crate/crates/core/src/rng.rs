//! Seeded, splittable random streams.
//!
//! Every consumer gets its own ChaCha stream addressed by `(seed, stream id)`,
//! so results never depend on scheduling or on how many other consumers ran
//! before it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids used inside one training run.
pub mod purpose {
    pub const SAMPLE_P: u64 = 1;
    pub const SAMPLE_Q: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE_X: u64 = 4;
    pub const SHUFFLE_Y: u64 = 5;
    pub const MONTE_CARLO: u64 = 6;
}

/// The random stream `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed handed to replica `replica` of an experiment with `master_seed`.
pub fn replica_seed(master_seed: u64, replica: u64) -> u64 {
    stream(master_seed, replica).next_u64()
}
