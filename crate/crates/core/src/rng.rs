//! Seeded random streams.
//!
//! Every stochastic quantity is drawn from ChaCha20 keyed by a 64-bit seed,
//! so a run is reproducible across platforms given the same crate versions.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Rng = ChaCha20Rng;

/// Recorded in run metadata.
pub const GENERATOR: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64)";

pub fn seeded(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent stream for a sub-task of `seed`, e.g. the test draw of a replicate.
pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
