//! Seedable, cross-platform RNG substreams.
//!
//! Every stochastic routine draws from a ChaCha8 stream keyed by
//! (seed, domain, entity index) so per-entity generation is independent of
//! iteration order and safe to parallelize.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep substreams from colliding across generation stages.
#[derive(Debug, Clone, Copy)]
pub enum Domain {
    QMatrix = 1,
    Mastery = 2,
    DinaParams = 3,
    Responses = 4,
    ContentPool = 5,
    Cat = 6,
    Instance = 7,
}

/// A fresh generator for one entity within one domain.
pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) ^ index);
    rng
}
