//! Seeded random streams. Every stochastic test and every randomized check in
//! the library draws from a named stream so runs are reproducible bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Independent generator for (seed, stream_id). Distinct stream ids on the
/// same seed never overlap.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream_id);
    r
}
