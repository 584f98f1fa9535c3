use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used by every sampler.
pub type SamplerRng = ChaCha8Rng;

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Equal pairs produce identical draws; different stream ids select
/// independent ChaCha streams under the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Creates the generator for this stream, positioned at its start.
    pub fn rng(&self) -> SamplerRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Stream for a sub-task (e.g. a particle or a replicate) of this stream.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: self
                .stream_id
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(index.wrapping_add(1)),
        }
    }
}
