//! Deterministic RNG streams.
//!
//! Randomized routines derive one ChaCha stream per unit of work (run,
//! resample, participant) from the caller's seed and merge results by stream
//! index. Output therefore never depends on thread scheduling or worker
//! count, only on the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
