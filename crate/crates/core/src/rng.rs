//! Deterministic random substreams.
//!
//! Every stochastic routine takes an explicit generator. Parallel work derives
//! one ChaCha stream per worker from a master seed so results depend only on
//! `(seed, workers)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` of the family rooted at `seed`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Splits `n` items into `workers` contiguous chunk lengths (earlier chunks take the remainder).
pub fn chunk_lengths(n: usize, workers: usize) -> Vec<usize> {
    let workers = workers.max(1);
    let base = n / workers;
    let extra = n % workers;
    (0..workers).map(|w| base + usize::from(w < extra)).collect()
}
