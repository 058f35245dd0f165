//! Seeded random streams.
//!
//! All randomness derives from one master seed. Each consumer gets its own
//! ChaCha stream id, and within a stream every draw site gets its own
//! fixed-size block of the counter space (one "quantum" of 2³⁶ words), so a
//! `(seed, stream, index)` triple fully determines the numbers it produces no
//! matter how many values earlier sites consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// log2 of the number of 32-bit words reserved per keyed draw site.
const QUANTUM_BITS: u32 = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Noise = 1,
    DataPerturbation = 2,
    PriorPerturbation = 3,
    MhProposal = 4,
    MhUniform = 5,
    GammaLambda = 6,
    GammaDelta = 7,
    PowerStart = 8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        RngStreams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator positioned at the start of `stream`.
    pub fn stream(&self, stream: Stream) -> ChaCha8Rng {
        self.keyed(stream, 0)
    }

    /// Generator positioned at the `index`-th quantum of `stream`.
    pub fn keyed(&self, stream: Stream, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng.set_word_pos((index as u128) << QUANTUM_BITS);
        rng
    }
}
