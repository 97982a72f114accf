//! Griffin-Lim phase recovery: alternating projection between the target
//! magnitude and the set of consistent spectrograms. The initial phase is
//! drawn from a fixed seed so synthesis is deterministic.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::real::Real;

use super::stft::{stft, istft, Spectrogram, StftConfig};

const PHASE_SEED: u64 = 0;

/// Recover a waveform from magnitude frames. Output length is
/// `(n_frames - 1) * hop`, the exact inverse of the analysis framing.
pub fn griffin_lim<F: Real>(
    magnitudes: &[Vec<F>],
    config: StftConfig,
    sample_rate: u32,
    iterations: usize,
) -> Result<AudioBuffer<F>> {
    let out_len = (magnitudes.len().max(1) - 1) * config.hop;
    Ok(griffin_lim_with_len(magnitudes, config, sample_rate, iterations, out_len)?.0)
}

/// As [`griffin_lim`], but synthesizes exactly `out_len` samples and also
/// returns the per-iteration spectral-convergence error.
pub fn griffin_lim_with_len<F: Real>(
    magnitudes: &[Vec<F>],
    config: StftConfig,
    sample_rate: u32,
    iterations: usize,
    out_len: usize,
) -> Result<(AudioBuffer<F>, Vec<F>)> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    if magnitudes.is_empty() || out_len == 0 {
        return Err(Error::EmptyBuffer);
    }
    let bins = config.n_bins();
    for row in magnitudes {
        if row.len() != bins {
            return Err(Error::DimensionMismatch {
                expected: bins,
                got: row.len(),
            });
        }
        if row.iter().any(|&m| m < F::zero() || !m.is_finite()) {
            return Err(Error::InvalidArgument(
                "magnitudes must be finite and non-negative".into(),
            ));
        }
    }

    // Pad (or trim) the target to the frame count the synthesis length implies.
    let n_req = out_len / config.hop + 1;
    let mut target: Vec<Vec<F>> = magnitudes.iter().take(n_req).cloned().collect();
    while target.len() < n_req {
        target.push(vec![F::zero(); bins]);
    }

    let total: F = target.iter().flatten().map(|&m| m * m).sum();
    if total == F::zero() {
        let silent = AudioBuffer::new(vec![F::zero(); out_len], sample_rate)?;
        return Ok((silent, vec![F::zero(); iterations]));
    }
    let target_norm = total.sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(PHASE_SEED);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut phases: Vec<Vec<Complex<F>>> = target
        .iter()
        .map(|row| {
            row.iter()
                .map(|_| {
                    let theta = rng.gen_range(0.0..two_pi);
                    Complex::new(F::from_f64_lossy(theta.cos()), F::from_f64_lossy(theta.sin()))
                })
                .collect()
        })
        .collect();

    let tiny = F::from_f64_lossy(1e-16);
    let mut errors = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let spec = compose(&target, &phases, config, sample_rate, out_len)?;
        let signal = istft(&spec)?;
        let reproj = stft(&signal, config)?;

        let mut err_sq = F::zero();
        for (t, row) in target.iter().enumerate() {
            let frame = reproj.frame(t);
            for (k, &m) in row.iter().enumerate() {
                let mag = frame[k].norm();
                let d = mag - m;
                err_sq += d * d;
                phases[t][k] = if mag > tiny {
                    frame[k] / mag
                } else {
                    phases[t][k]
                };
            }
        }
        errors.push(err_sq.sqrt() / target_norm);
    }

    let spec = compose(&target, &phases, config, sample_rate, out_len)?;
    Ok((istft(&spec)?, errors))
}

fn compose<F: Real>(
    target: &[Vec<F>],
    phases: &[Vec<Complex<F>>],
    config: StftConfig,
    sample_rate: u32,
    out_len: usize,
) -> Result<Spectrogram<F>> {
    let frames: Vec<Vec<Complex<F>>> = target
        .iter()
        .zip(phases)
        .map(|(mags, phase)| {
            mags.iter()
                .zip(phase)
                .map(|(&m, &p)| p * m)
                .collect()
        })
        .collect();
    Spectrogram::from_frames(frames, config, sample_rate, out_len)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_magnitudes(config: StftConfig) -> (Vec<Vec<f64>>, usize) {
        let n = 8192;
        let samples: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 500.0 * i as f64 / 16000.0).sin())
            .collect();
        let buf = AudioBuffer::new(samples, 16000).unwrap();
        let spec = stft(&buf, config).unwrap();
        (spec.magnitudes(), n)
    }

    #[test]
    fn sine_magnitude_self_consistency() {
        let config = StftConfig::with_window(1024).unwrap();
        let (mags, n) = sine_magnitudes(config);
        let (out, errors) = griffin_lim_with_len(&mags, config, 16000, 60, n).unwrap();
        let reproj = stft(&out, config).unwrap();
        let mut err = 0.0f64;
        let mut norm = 0.0f64;
        for (t, row) in mags.iter().enumerate() {
            let frame = reproj.frame(t);
            for (k, &m) in row.iter().enumerate() {
                err += (frame[k].norm() - m).powi(2);
                norm += m * m;
            }
        }
        let rel = (err / norm).sqrt();
        // random-phase init converges slowly; require a loose bound plus
        // a clear improvement over the first iteration
        assert!(rel < 0.25, "relative error {rel}");
        assert!(rel < 0.5 * errors[0], "{rel} vs initial {}", errors[0]);
    }

    #[test]
    fn spectral_convergence_non_increasing() {
        let config = StftConfig::with_window(512).unwrap();
        let (mags, n) = sine_magnitudes(config);
        let (_, errors) = griffin_lim_with_len(&mags, config, 16000, 30, n).unwrap();
        for pair in errors.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-10, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn zero_magnitude_gives_zero_signal() {
        let config = StftConfig::with_window(256).unwrap();
        let mags = vec![vec![0.0f64; config.n_bins()]; 20];
        let out = griffin_lim(&mags, config, 16000, 5).unwrap();
        assert!(out.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn deterministic_across_calls() {
        let config = StftConfig::with_window(512).unwrap();
        let (mags, n) = sine_magnitudes(config);
        let (a, _) = griffin_lim_with_len(&mags, config, 16000, 10, n).unwrap();
        let (b, _) = griffin_lim_with_len(&mags, config, 16000, 10, n).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn zero_iterations_rejected() {
        let config = StftConfig::with_window(256).unwrap();
        let mags = vec![vec![0.1f64; config.n_bins()]; 4];
        assert!(griffin_lim(&mags, config, 16000, 0).is_err());
    }
}
