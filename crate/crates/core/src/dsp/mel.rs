//! Mel filterbank, mel spectrogram, and mel cepstrum.

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::real::Real;

use super::stft::{stft, StftConfig};

/// Power floor applied before taking logs.
pub const LOG_FLOOR: f64 = 1e-10;

/// HTK mel scale.
pub fn hz_to_mel<F: Real>(hz: F) -> F {
    let c = F::from_f64_lossy(2595.0);
    let k = F::from_f64_lossy(700.0);
    c * (F::one() + hz / k).log10()
}

pub fn mel_to_hz<F: Real>(mel: F) -> F {
    let c = F::from_f64_lossy(2595.0);
    let k = F::from_f64_lossy(700.0);
    let ten = F::from_f64_lossy(10.0);
    k * (ten.powf(mel / c) - F::one())
}

/// Triangular mel filterbank on HTK mel spacing, each row normalized to
/// unit sum. Returned row-major, `n_mels` rows of `n_fft_bins` columns.
pub fn mel_filterbank<F: Real>(
    n_fft_bins: usize,
    n_mels: usize,
    sample_rate: u32,
    fmin: F,
    fmax: F,
) -> Result<Vec<Vec<F>>> {
    let nyquist = F::from_f64_lossy(sample_rate as f64 / 2.0);
    if !(fmin >= F::zero() && fmin < fmax && fmax <= nyquist) {
        return Err(Error::InvalidArgument(format!(
            "invalid frequency bounds: fmin {fmin}, fmax {fmax}, nyquist {nyquist}"
        )));
    }
    if n_mels == 0 {
        return Err(Error::InvalidArgument("n_mels must be >= 1".into()));
    }

    let mel_min = hz_to_mel(fmin);
    let mel_max = hz_to_mel(fmax);
    // n_mels + 2 edge points, evenly spaced in mel
    let edges: Vec<F> = (0..n_mels + 2)
        .map(|i| {
            let frac = F::from_usize_lossy(i) / F::from_usize_lossy(n_mels + 1);
            mel_to_hz(mel_min + (mel_max - mel_min) * frac)
        })
        .collect();

    // frequency of each FFT bin; bins span [0, nyquist]
    let n_fft = (n_fft_bins - 1) * 2;
    let bin_hz: Vec<F> = (0..n_fft_bins)
        .map(|k| {
            F::from_f64_lossy(sample_rate as f64) * F::from_usize_lossy(k)
                / F::from_usize_lossy(n_fft)
        })
        .collect();

    let mut rows = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut row = vec![F::zero(); n_fft_bins];
        for (k, &f) in bin_hz.iter().enumerate() {
            if f > lo && f < hi {
                row[k] = if f <= center {
                    (f - lo) / (center - lo)
                } else {
                    (hi - f) / (hi - center)
                };
            }
        }
        let sum: F = row.iter().copied().sum();
        if sum > F::zero() {
            for v in &mut row {
                *v /= sum;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Mel-domain frames: power values or their logs.
#[derive(Debug, Clone)]
pub struct MelSpectrogram<F: Real> {
    pub frames: Vec<Vec<F>>,
    pub n_mels: usize,
    pub fmin: F,
    pub fmax: F,
    pub log_scaled: bool,
    pub hop: usize,
    pub sample_rate: u32,
}

/// Power spectrogram projected through the mel filterbank. With `log` set,
/// values are `ln(max(power, 1e-10))`.
pub fn mel_spectrogram<F: Real>(
    buffer: &AudioBuffer<F>,
    config: StftConfig,
    n_mels: usize,
    log: bool,
) -> Result<MelSpectrogram<F>> {
    let spec = stft(buffer, config)?;
    let fmin = F::zero();
    let fmax = F::from_f64_lossy(buffer.sample_rate() as f64 / 2.0);
    let fb = mel_filterbank(spec.n_bins(), n_mels, buffer.sample_rate(), fmin, fmax)?;
    let floor = F::from_f64_lossy(LOG_FLOOR);

    let mut frames = Vec::with_capacity(spec.n_frames());
    for t in 0..spec.n_frames() {
        let power: Vec<F> = spec.frame(t).iter().map(|c| c.norm_sqr()).collect();
        let mut mel = vec![F::zero(); n_mels];
        for (m, row) in fb.iter().enumerate() {
            let mut acc = F::zero();
            for (w, p) in row.iter().zip(&power) {
                acc += *w * *p;
            }
            mel[m] = if log { acc.max(floor).ln() } else { acc };
        }
        frames.push(mel);
    }

    Ok(MelSpectrogram {
        frames,
        n_mels,
        fmin,
        fmax,
        log_scaled: log,
        hop: config.hop,
        sample_rate: buffer.sample_rate(),
    })
}

/// Orthonormal DCT-II of each log-mel frame, truncated to `order + 1`
/// coefficients (`c_0..c_order`).
pub fn mel_cepstrum<F: Real>(mel: &MelSpectrogram<F>, order: usize) -> Result<Vec<Vec<F>>> {
    if !mel.log_scaled {
        return Err(Error::InvalidArgument(
            "mel_cepstrum requires a log-scaled mel spectrogram".into(),
        ));
    }
    if order >= mel.n_mels {
        return Err(Error::InvalidArgument(format!(
            "cepstral order {order} must be < n_mels {}",
            mel.n_mels
        )));
    }
    let n = mel.n_mels;
    let scale0 = F::from_f64_lossy((1.0 / n as f64).sqrt());
    let scale = F::from_f64_lossy((2.0 / n as f64).sqrt());
    let pi_over_n = F::PI() / F::from_usize_lossy(n);
    let half = F::from_f64_lossy(0.5);

    Ok(mel
        .frames
        .iter()
        .map(|frame| {
            (0..=order)
                .map(|k| {
                    let mut acc = F::zero();
                    for (i, &x) in frame.iter().enumerate() {
                        let angle = pi_over_n * (F::from_usize_lossy(i) + half)
                            * F::from_usize_lossy(k);
                        acc += x * angle.cos();
                    }
                    acc * if k == 0 { scale0 } else { scale }
                })
                .collect()
        })
        .collect())
}
