//! Deterministic random streams.
//!
//! Every random choice in a simulation is drawn from a [`RandomStream`]
//! seeded from a single 64-bit value. Independent trials use disjoint ChaCha
//! stream ids derived from the trial counter, so they can run in any order or
//! in parallel without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

/// A stream seeded from `seed` on ChaCha stream 0.
pub fn seeded_stream(seed: u64) -> RandomStream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The stream for trial `index` under master seed `seed`.
pub fn trial_stream(seed: u64, index: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Stream 0 is left to seeded_stream.
    rng.set_stream(index.wrapping_add(1));
    rng
}
