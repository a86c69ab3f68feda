//! Counter-based Gaussian variates.
//!
//! A variate is a pure function of `(seed, stream_id, index)`: ChaCha20 is
//! keyed from the seed, the stream id selects the ChaCha stream and the
//! index selects the word position. Field mode slot `j` always reads
//! stream `j`, so a mode's amplitudes do not depend on which other modes
//! happen to be active.

use core::f64::consts::TAU;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// ChaCha words consumed per Gaussian (two `u64` uniforms).
const WORDS_PER_VARIATE: u128 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }
}

/// Sequential reader over one Gaussian stream, starting at any index.
#[derive(Clone)]
pub struct GaussianStream {
    rng: ChaCha20Rng,
}

impl GaussianStream {
    pub fn new(spec: RngSpec) -> Self {
        Self::starting_at(spec, 0)
    }

    pub fn starting_at(spec: RngSpec, index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
        rng.set_stream(spec.stream_id);
        rng.set_word_pos(u128::from(index) * WORDS_PER_VARIATE);
        Self { rng }
    }

    /// Standard normal variate via the cosine branch of Box-Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = unit_open_closed(self.rng.next_u64());
        let u2 = unit_closed_open(self.rng.next_u64());
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(TAU * u2)
    }
}

impl Iterator for GaussianStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_gaussian())
    }
}

/// Random access to the `index`-th variate of a stream.
pub fn gaussian_at(spec: RngSpec, index: u64) -> f64 {
    GaussianStream::starting_at(spec, index).next_gaussian()
}

fn unit_closed_open(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn unit_open_closed(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}
