//! Seeded random streams.
//!
//! Every stochastic routine takes a `u64` seed. Work that fans out over
//! simulations or trials derives one child seed per task from the master
//! seed and the task's counter path, so results never depend on the order
//! or the number of threads that execute the tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a counter path such as
/// `[stream, row, col, trial]`. Distinct paths give unrelated seeds.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for (depth, &counter) in path.iter().enumerate() {
        state = splitmix64(
            state ^ splitmix64(counter.wrapping_add((depth as u64 + 1).wrapping_mul(GOLDEN))),
        );
    }
    state
}

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
