//! Reproducible random streams.
//!
//! Every history `l` of an ensemble generated with seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `l`. Bootstrap
//! replicate `r` of a run with seed `s` uses the seed
//! [`replicate_seed`]`(s, r)`. Results therefore depend only on the seed and
//! the index, never on how work is scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn history_stream(seed: u64, history: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(history);
    rng
}

/// Seed of the `replicate`-th synthetic ensemble derived from `seed`.
///
/// Drawn from a stream of the base seed that no ensemble history uses
/// (streams count down from `u64::MAX`).
pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - replicate);
    rng.next_u64()
}
