//! Deterministic random streams.
//!
//! Every independent unit of work (a shot, a particle history, a Grover
//! power) draws from its own ChaCha stream keyed by `(seed, index)`, so
//! results do not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Returns the generator for stream `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
