//! Per-trial random streams.
//!
//! Every random draw is keyed by `(master seed, trial index, role)` so that
//! results do not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct roles never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamRole {
    Covariates = 0,
    Labels = 1,
    Flips = 2,
    Test = 3,
    Aux = 4,
}

const ROLES: u64 = 8;

/// Independent generator for one `(seed, trial, role)` triple.
pub fn stream(master_seed: u64, trial: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial.wrapping_mul(ROLES).wrapping_add(role as u64));
    rng
}
