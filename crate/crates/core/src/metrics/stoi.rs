//! Short-time objective intelligibility: mean correlation of one-third-
//! octave temporal envelopes, computed at 10 kHz with 15 bands from
//! 150 Hz, 25.6 ms frames at 50% overlap, 30-frame segments, and
//! clipping at a -15 dB SDR bound.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{resample, AudioBuffer};
use crate::error::{Error, Result};
use crate::real::Real;

/// Internal analysis rate.
pub const STOI_FS: u32 = 10_000;
const N_FRAME: usize = 256;
const NFFT: usize = 512;
const NUM_BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEG_LEN: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = 2.220446049250313e-16;

/// Symmetric Hann without zero endpoints (MATLAB `hanning(n)`).
fn hanning<F: Real>(n: usize) -> Vec<F> {
    (0..n)
        .map(|k| {
            let phase = 2.0 * std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64;
            F::from_f64_lossy(0.5 * (1.0 - phase.cos()))
        })
        .collect()
}

/// Drop frames more than 40 dB below the loudest reference frame, then
/// overlap-add the kept (windowed) frames back into signals.
fn remove_silent_frames<F: Real>(x: &[F], y: &[F]) -> (Vec<F>, Vec<F>) {
    let hop = N_FRAME / 2;
    if x.len() < N_FRAME {
        return (Vec::new(), Vec::new());
    }
    let w = hanning::<F>(N_FRAME);
    let starts: Vec<usize> = (0..x.len() - N_FRAME).step_by(hop).collect();
    if starts.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let energies: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: F = x[s..s + N_FRAME]
                .iter()
                .zip(&w)
                .map(|(&v, &wv)| v * wv * v * wv)
                .sum();
            20.0 * (e.to_f64_lossy().sqrt() / (N_FRAME as f64).sqrt() + EPS).log10()
        })
        .collect();
    let max_e = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| e - max_e + DYN_RANGE_DB > 0.0)
        .map(|(&s, _)| s)
        .collect();
    if kept.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let out_len = (kept.len() - 1) * hop + N_FRAME;
    let mut xs = vec![F::zero(); out_len];
    let mut ys = vec![F::zero(); out_len];
    for (count, &s) in kept.iter().enumerate() {
        let base = count * hop;
        for j in 0..N_FRAME {
            xs[base + j] += x[s + j] * w[j];
            ys[base + j] += y[s + j] * w[j];
        }
    }
    (xs, ys)
}

/// Zero-padded windowed DFT magnitudes, `n_frames x 257`.
fn spectrogram_magnitudes<F: Real>(x: &[F]) -> Vec<Vec<F>> {
    if x.len() <= N_FRAME {
        return Vec::new();
    }
    let hop = N_FRAME / 2;
    let w = hanning::<F>(N_FRAME);
    let mut planner = FftPlanner::<F>::new();
    let fft = planner.plan_fft_forward(NFFT);
    let bins = NFFT / 2 + 1;
    let mut out = Vec::new();
    let mut scratch = vec![Complex::new(F::zero(), F::zero()); NFFT];
    for start in (0..x.len() - N_FRAME).step_by(hop) {
        for slot in scratch.iter_mut() {
            *slot = Complex::new(F::zero(), F::zero());
        }
        for j in 0..N_FRAME {
            scratch[j] = Complex::new(x[start + j] * w[j], F::zero());
        }
        fft.process(&mut scratch);
        out.push(scratch[..bins].iter().map(|c| c.norm()).collect());
    }
    out
}

/// One-third-octave band matrix: `NUM_BANDS x 257`, 1 where a bin belongs
/// to a band.
fn third_octave_bands() -> Vec<Vec<f64>> {
    let bins = NFFT / 2 + 1;
    let f: Vec<f64> = (0..bins)
        .map(|k| STOI_FS as f64 * k as f64 / NFFT as f64)
        .collect();
    let nearest = |target: f64| -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &fi) in f.iter().enumerate() {
            let d = (fi - target) * (fi - target);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    };
    (0..NUM_BANDS)
        .map(|k| {
            let cf = MIN_FREQ * 2.0f64.powf(k as f64 / 3.0);
            let fl = cf / 2.0f64.powf(1.0 / 6.0);
            let fr = cf * 2.0f64.powf(1.0 / 6.0);
            let lo = nearest(fl);
            let hi = nearest(fr);
            let mut row = vec![0.0; bins];
            for slot in row.iter_mut().take(hi).skip(lo) {
                *slot = 1.0;
            }
            row
        })
        .collect()
}

/// STOI of a (reference, degraded) pair. Inputs at other rates are
/// resampled to 10 kHz internally.
pub fn stoi<F: Real>(reference: &AudioBuffer<F>, degraded: &AudioBuffer<F>) -> Result<F> {
    if reference.sample_rate() != degraded.sample_rate() {
        return Err(Error::SampleRateMismatch(
            reference.sample_rate(),
            degraded.sample_rate(),
        ));
    }
    let (x_buf, y_buf);
    let (x, y): (&[F], &[F]) = if reference.sample_rate() != STOI_FS {
        x_buf = resample(reference, STOI_FS)?;
        y_buf = resample(degraded, STOI_FS)?;
        (x_buf.samples(), y_buf.samples())
    } else {
        (reference.samples(), degraded.samples())
    };
    let n = x.len().min(y.len());
    let (xs, ys) = remove_silent_frames(&x[..n], &y[..n]);

    let x_spec = spectrogram_magnitudes(&xs);
    let y_spec = spectrogram_magnitudes(&ys);
    let m = x_spec.len().min(y_spec.len());
    if m < SEG_LEN {
        return Err(Error::MetricUndefined("too_short".into()));
    }

    let obm = third_octave_bands();
    let band_envelope = |spec: &[Vec<F>]| -> Vec<Vec<F>> {
        spec.iter()
            .take(m)
            .map(|frame| {
                obm.iter()
                    .map(|row| {
                        let mut acc = F::zero();
                        for (w, v) in row.iter().zip(frame) {
                            if *w != 0.0 {
                                acc += *v * *v;
                            }
                        }
                        acc.sqrt()
                    })
                    .collect()
            })
            .collect()
    };
    // frame-major: env[t][band]
    let x_env = band_envelope(&x_spec);
    let y_env = band_envelope(&y_spec);

    let clip = F::from_f64_lossy(1.0 + 10.0f64.powf(-BETA_DB / 20.0));
    let eps = F::from_f64_lossy(EPS);
    let mut total = F::zero();
    let mut count = 0usize;
    for seg_end in SEG_LEN..=m {
        let seg = seg_end - SEG_LEN..seg_end;
        for band in 0..NUM_BANDS {
            let xv: Vec<F> = seg.clone().map(|t| x_env[t][band]).collect();
            let yv: Vec<F> = seg.clone().map(|t| y_env[t][band]).collect();
            let x_sq: F = xv.iter().map(|&v| v * v).sum();
            let y_sq: F = yv.iter().map(|&v| v * v).sum();
            let alpha = (x_sq / (y_sq + eps)).sqrt();
            let y_prime: Vec<F> = yv
                .iter()
                .zip(&xv)
                .map(|(&yv, &xv)| (yv * alpha).min(xv * clip))
                .collect();
            total += correlation(&xv, &y_prime, eps);
            count += 1;
        }
    }
    Ok(total / F::from_usize_lossy(count))
}

fn correlation<F: Real>(a: &[F], b: &[F], eps: F) -> F {
    let n = F::from_usize_lossy(a.len());
    let ma = a.iter().copied().sum::<F>() / n;
    let mb = b.iter().copied().sum::<F>() / n;
    let mut dot = F::zero();
    let mut na = F::zero();
    let mut nb = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        dot += dx * dy;
        na += dx * dx;
        nb += dy * dy;
    }
    dot / (na.sqrt() * nb.sqrt() + eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Speech-band modulated noise at 10 kHz.
    fn speechlike(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // 4 Hz amplitude modulation roughly mimics a syllabic envelope
        (0..n)
            .map(|i| {
                let t = i as f64 / STOI_FS as f64;
                let env = 0.55 + 0.45 * (2.0 * std::f64::consts::PI * 4.0 * t).sin();
                raw[i] * env
            })
            .collect()
    }

    fn mix(clean: &[f64], noise: &[f64], snr_db: f64) -> Vec<f64> {
        let pc: f64 = clean.iter().map(|v| v * v).sum();
        let pn: f64 = noise.iter().map(|v| v * v).sum();
        let gain = (pc / pn / 10.0f64.powf(snr_db / 10.0)).sqrt();
        clean
            .iter()
            .zip(noise)
            .map(|(c, n)| c + gain * n)
            .collect()
    }

    fn buf(samples: Vec<f64>) -> AudioBuffer<f64> {
        AudioBuffer::new(samples, STOI_FS).unwrap()
    }

    #[test]
    fn identical_signals_score_one() {
        let clean = speechlike(30000, 1);
        let v = stoi(&buf(clean.clone()), &buf(clean)).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "stoi = {v}");
    }

    #[test]
    fn independent_noise_scores_low() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let clean = speechlike(30000, 1);
        let noise: Vec<f64> = (0..30000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = stoi(&buf(clean), &buf(noise)).unwrap();
        assert!(v < 0.4, "stoi = {v}");
    }

    #[test]
    fn higher_snr_scores_higher() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let clean = speechlike(30000, 4);
        let noise: Vec<f64> = (0..30000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let hi = stoi(&buf(clean.clone()), &buf(mix(&clean, &noise, 20.0))).unwrap();
        let lo = stoi(&buf(clean.clone()), &buf(mix(&clean, &noise, 0.0))).unwrap();
        assert!(hi > lo, "hi {hi} vs lo {lo}");
    }

    #[test]
    fn too_short_input_is_undefined() {
        let clean = speechlike(2000, 5);
        match stoi(&buf(clean.clone()), &buf(clean)) {
            Err(Error::MetricUndefined(reason)) => assert_eq!(reason, "too_short"),
            other => panic!("expected too_short, got {other:?}"),
        }
    }

    #[test]
    fn non_10k_input_is_resampled() {
        let clean_16k: Vec<f64> = speechlike(48000, 6);
        let a = AudioBuffer::new(clean_16k.clone(), 16000).unwrap();
        let v = stoi(&a, &a).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
    }
}
