//! Seeded, stream-separated random number generators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for the pair `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
