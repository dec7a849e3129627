//! Deterministic per-replication random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_091_027;

/// Stream `stream` of the ChaCha8 generator keyed by `master`. Distinct
/// streams never overlap, so replications can run in any order.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}
