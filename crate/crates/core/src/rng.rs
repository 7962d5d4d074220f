//! Reproducible random streams.
//!
//! Each topology draw owns independent ChaCha streams keyed by
//! `(seed, draw, purpose)`, so results do not depend on how draws are
//! scheduled across threads. The hot channel-sampling loop runs on a
//! xoshiro generator seeded from its ChaCha stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SimRng = ChaCha8Rng;
pub type FastRng = Xoshiro256PlusPlus;

/// What a stream is used for within one topology draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Positions and shadowing.
    Topology = 0,
    /// Small-scale channel draws for the inverse-Gram expectations.
    Channel = 1,
    /// Link-level oracles and other auxiliary sampling.
    Auxiliary = 2,
}

const PURPOSES: u64 = 4;

pub fn stream(seed: u64, draw: u64, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw * PURPOSES + purpose as u64);
    rng
}

/// Fast generator for bulk Gaussian sampling, seeded from [`stream`].
pub fn fast_stream(seed: u64, draw: u64, purpose: Purpose) -> FastRng {
    Xoshiro256PlusPlus::from_rng(&mut stream(seed, draw, purpose))
}
