//! Deterministic random streams.
//!
//! Every replication of a Monte Carlo harness draws from its own ChaCha8
//! stream keyed by `(master seed, replication index)`, so replications can
//! run in any order or in parallel and still produce identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Inverse-CDF draw from a discrete distribution given as `(outcome, weight)`
/// pairs, walked in the given order. Falls back to the last outcome with
/// positive weight when rounding leaves the cumulative sum short of `u`.
pub fn sample_discrete<R: Rng + ?Sized>(rng: &mut R, entries: &[(usize, f64)]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = entries[0].0;
    for &(outcome, w) in entries {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = outcome;
        if u < acc {
            return outcome;
        }
    }
    last
}
