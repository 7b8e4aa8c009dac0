//! Seeded, splittable randomness.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! `(master_seed, stream_index)`. ChaCha exposes the stream id directly, so
//! selecting a stream is O(1) and independent of how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type NoiseRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngPolicy {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngPolicy {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngPolicy {
            master_seed,
            stream_index,
        }
    }

    /// Same master seed, different stream.
    pub fn with_stream(self, stream_index: u64) -> Self {
        RngPolicy { stream_index, ..self }
    }

    pub fn rng(&self) -> NoiseRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

#[inline]
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
