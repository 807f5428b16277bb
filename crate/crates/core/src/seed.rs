//! One master seed, fanned out into independent named random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    EnvNoise,
    AgentInit,
    AgentExplore,
    NilmInit,
    NilmBatch,
    Synth,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::EnvNoise => 1,
            Stream::AgentInit => 2,
            Stream::AgentExplore => 3,
            Stream::NilmInit => 4,
            Stream::NilmBatch => 5,
            Stream::Synth => 6,
        }
    }
}

/// Deterministic generator for `stream` under `master`.
pub fn rng(master: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(master);
    r.set_stream(stream.id());
    r
}
