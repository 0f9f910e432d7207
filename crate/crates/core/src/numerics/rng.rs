use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Deterministic random source.
///
/// ChaCha8 keyed by `seed_from_u64(seed)`; the master sequence uses ChaCha
/// stream 0 and substream `i` uses stream `i + 1`. Output is identical on
/// every platform.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::on_stream(seed, 0)
    }

    fn on_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Independent source for work item `index`, derived from the seed only.
    ///
    /// # Panics
    ///
    /// If `index == u64::MAX` (its stream id would collide with the master).
    pub fn substream(&self, index: u64) -> Self {
        let stream = index.checked_add(1).expect("substream index overflow");
        Self::on_stream(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
