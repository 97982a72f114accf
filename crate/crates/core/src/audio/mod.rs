//! Audio I/O and normalization. Everything downstream operates on a
//! canonical mono float representation with an explicit sample rate.

mod resample;
mod wav;

pub use resample::resample;
pub use wav::{encode_wav, read_wav, write_wav, WavEncoding};

use crate::error::{Error, Result};
use crate::real::Real;

/// Mono sampled signal. Immutable after construction; cheap to share
/// read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<F: Real> {
    samples: Vec<F>,
    sample_rate: u32,
}

impl<F: Real> AudioBuffer<F> {
    pub fn new(samples: Vec<F>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate(0));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[F] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<F> {
        self.samples
    }
}

/// Scale so the peak absolute amplitude equals `target_peak`.
/// All-zero input is returned unchanged.
pub fn peak_normalize<F: Real>(buffer: &AudioBuffer<F>, target_peak: F) -> AudioBuffer<F> {
    assert!(
        target_peak > F::zero() && target_peak <= F::one(),
        "target_peak must be in (0, 1]"
    );
    let peak = buffer
        .samples
        .iter()
        .fold(F::zero(), |acc, &s| acc.max(s.abs()));
    if peak == F::zero() {
        return buffer.clone();
    }
    let gain = target_peak / peak;
    AudioBuffer {
        samples: buffer.samples.iter().map(|&s| s * gain).collect(),
        sample_rate: buffer.sample_rate,
    }
}
