//! Mel cepstral distortion: dB-scaled Euclidean distance between
//! frame-aligned mel-cepstral trajectories (no DTW; codec outputs are
//! time-aligned with their inputs).
//!
//! The cepstra come from this crate's log-mel + DCT chain rather than an
//! SPTK/MLSA analysis, so absolute values are not comparable to
//! SPTK-based MCD numbers.

use crate::audio::AudioBuffer;
use crate::dsp::{mel_cepstrum, mel_spectrogram, StftConfig};
use crate::error::{Error, Result};
use crate::real::Real;

/// Analysis window for MCD cepstra.
pub const MCD_WINDOW: usize = 1024;
/// Mel bins feeding the DCT; must exceed the cepstral order.
pub const MCD_N_MELS: usize = 40;
/// Default cepstral order (c_1..c_24 enter the distance; c_0 is excluded).
pub const DEFAULT_MCD_ORDER: usize = 24;

/// MCD in dB between two frame sequences of cepstra (`c_0` excluded).
pub fn mcd_from_cepstra<F: Real>(reference: &[Vec<F>], degraded: &[Vec<F>]) -> Result<F> {
    let n_frames = reference.len().min(degraded.len());
    if n_frames == 0 {
        return Err(Error::MetricUndefined("no_frames".into()));
    }
    let scale = F::from_f64_lossy(10.0 / std::f64::consts::LN_10);
    let two = F::from_f64_lossy(2.0);
    let mut total = F::zero();
    for (r, d) in reference.iter().zip(degraded).take(n_frames) {
        if r.len() != d.len() {
            return Err(Error::LengthMismatch(r.len(), d.len()));
        }
        let mut sq = F::zero();
        for (a, b) in r.iter().zip(d).skip(1) {
            let diff = *a - *b;
            sq += diff * diff;
        }
        total += scale * (two * sq).sqrt();
    }
    Ok(total / F::from_usize_lossy(n_frames))
}

/// Frame-aligned MCD between a reference and degraded signal.
pub fn mcd<F: Real>(
    reference: &AudioBuffer<F>,
    degraded: &AudioBuffer<F>,
    order: usize,
) -> Result<F> {
    if reference.sample_rate() != degraded.sample_rate() {
        return Err(Error::SampleRateMismatch(
            reference.sample_rate(),
            degraded.sample_rate(),
        ));
    }
    let config = StftConfig::with_window(MCD_WINDOW)?;
    let ref_mel = mel_spectrogram(reference, config, MCD_N_MELS, true)?;
    let deg_mel = mel_spectrogram(degraded, config, MCD_N_MELS, true)?;
    let ref_ceps = mel_cepstrum(&ref_mel, order)?;
    let deg_ceps = mel_cepstrum(&deg_mel, order)?;
    mcd_from_cepstra(&ref_ceps, &deg_ceps)
}
