use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Keeps harness streams apart from solver restart streams seeded directly
/// with the master seed.
const SALT: u64 = 0x6d61_6862_7472_6961;

/// Seeds owned by one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub scenario: u64,
    pub solver: u64,
}

/// Seeds for trial `trial`. They do not depend on the sweep value or the
/// scheme list, so every sweep point and scheme sees the same scenario.
pub fn trial_seeds(master: u64, trial: u64) -> TrialSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ SALT);
    rng.set_stream(trial);
    TrialSeeds {
        scenario: rng.next_u64(),
        solver: rng.next_u64(),
    }
}
