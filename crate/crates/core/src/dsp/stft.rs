//! Short-time Fourier analysis and synthesis with center reflect-padding
//! and window-square-normalized overlap-add.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::real::Real;

/// STFT parameters. The window is always Hann (periodic form).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop: usize,
}

impl StftConfig {
    /// Window with an explicit hop.
    pub fn new(window_size: usize, hop: usize) -> Result<Self> {
        if window_size == 0 || !window_size.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "window size must be a power of two, got {window_size}"
            )));
        }
        if hop == 0 || hop > window_size {
            return Err(Error::InvalidArgument(format!(
                "hop must satisfy 0 < hop <= window ({hop} vs {window_size})"
            )));
        }
        Ok(Self { window_size, hop })
    }

    /// Default hop of a quarter window.
    pub fn with_window(window_size: usize) -> Result<Self> {
        Self::new(window_size, window_size / 4)
    }

    pub fn n_bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    /// Overlap-add with window-square normalization reconstructs exactly
    /// whenever every sample keeps nonzero window coverage.
    pub fn is_cola(&self) -> bool {
        self.hop <= self.window_size / 2
    }
}

/// Periodic Hann window.
pub fn hann_window<F: Real>(size: usize) -> Vec<F> {
    let two_pi = F::PI() + F::PI();
    (0..size)
        .map(|n| {
            let phase = two_pi * F::from_usize_lossy(n) / F::from_usize_lossy(size);
            F::from_f64_lossy(0.5) * (F::one() - phase.cos())
        })
        .collect()
}

/// Complex STFT frames, one row per frame, `window_size/2 + 1` bins each.
#[derive(Debug, Clone)]
pub struct Spectrogram<F: Real> {
    data: Vec<Complex<F>>,
    n_frames: usize,
    config: StftConfig,
    sample_rate: u32,
    /// Unpadded signal length, kept so synthesis can trim exactly.
    original_len: usize,
}

impl<F: Real> Spectrogram<F> {
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.config.n_bins()
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    pub fn frame(&self, i: usize) -> &[Complex<F>] {
        let bins = self.n_bins();
        &self.data[i * bins..(i + 1) * bins]
    }

    pub fn frame_mut(&mut self, i: usize) -> &mut [Complex<F>] {
        let bins = self.config.n_bins();
        &mut self.data[i * bins..(i + 1) * bins]
    }

    /// Per-frame magnitudes, same layout as the complex data.
    pub fn magnitudes(&self) -> Vec<Vec<F>> {
        (0..self.n_frames)
            .map(|i| self.frame(i).iter().map(|c| c.norm()).collect())
            .collect()
    }

    /// Assemble a spectrogram from raw frames (used by Griffin-Lim).
    pub fn from_frames(
        frames: Vec<Vec<Complex<F>>>,
        config: StftConfig,
        sample_rate: u32,
        original_len: usize,
    ) -> Result<Self> {
        let bins = config.n_bins();
        let n_frames = frames.len();
        let mut data = Vec::with_capacity(n_frames * bins);
        for f in &frames {
            if f.len() != bins {
                return Err(Error::DimensionMismatch {
                    expected: bins,
                    got: f.len(),
                });
            }
            data.extend_from_slice(f);
        }
        Ok(Self {
            data,
            n_frames,
            config,
            sample_rate,
            original_len,
        })
    }
}

/// Reflect index `i` into `[0, len)` (numpy "reflect" mode, edge excluded).
fn reflect_index(i: i64, len: usize) -> usize {
    debug_assert!(len > 0);
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as i64 {
        j = period - j;
    }
    j as usize
}

/// Center-padded (reflect) Hann-windowed complex STFT.
pub fn stft<F: Real>(buffer: &AudioBuffer<F>, config: StftConfig) -> Result<Spectrogram<F>> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let n = config.window_size;
    let pad = n / 2;
    let x = buffer.samples();
    let padded_len = x.len() + 2 * pad;
    if n > padded_len {
        return Err(Error::WindowTooLarge {
            window: n,
            len: padded_len,
        });
    }
    let window = hann_window::<F>(n);
    let n_frames = (padded_len - n) / config.hop + 1;

    let mut planner = FftPlanner::<F>::new();
    let fft = planner.plan_fft_forward(n);
    let bins = config.n_bins();
    let mut data = Vec::with_capacity(n_frames * bins);
    let mut scratch = vec![Complex::new(F::zero(), F::zero()); n];

    for t in 0..n_frames {
        let start = t as i64 * config.hop as i64 - pad as i64;
        for (k, slot) in scratch.iter_mut().enumerate() {
            let sample = x[reflect_index(start + k as i64, x.len())];
            *slot = Complex::new(sample * window[k], F::zero());
        }
        fft.process(&mut scratch);
        data.extend_from_slice(&scratch[..bins]);
    }

    Ok(Spectrogram {
        data,
        n_frames,
        config,
        sample_rate: buffer.sample_rate(),
        original_len: x.len(),
    })
}

/// Inverse STFT: overlap-add with window-square normalization, then the
/// center padding is removed so the output length matches the original.
pub fn istft<F: Real>(spec: &Spectrogram<F>) -> Result<AudioBuffer<F>> {
    let config = spec.config;
    if !config.is_cola() {
        return Err(Error::NonCola {
            window: config.window_size,
            hop: config.hop,
        });
    }
    let n = config.window_size;
    let pad = n / 2;
    let window = hann_window::<F>(n);
    let total = (spec.n_frames - 1) * config.hop + n;

    let mut planner = FftPlanner::<F>::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut acc = vec![F::zero(); total];
    let mut norm = vec![F::zero(); total];
    let mut full = vec![Complex::new(F::zero(), F::zero()); n];
    let inv_n = F::one() / F::from_usize_lossy(n);

    for t in 0..spec.n_frames {
        let half = spec.frame(t);
        // Rebuild the full spectrum by conjugate symmetry.
        full[..half.len()].copy_from_slice(half);
        for k in 1..n / 2 {
            full[n - k] = half[k].conj();
        }
        ifft.process(&mut full);
        let base = t * config.hop;
        for k in 0..n {
            let sample = full[k].re * inv_n;
            acc[base + k] += sample * window[k];
            norm[base + k] += window[k] * window[k];
        }
    }

    let tiny = F::from_f64_lossy(1e-12);
    let out: Vec<F> = (pad..pad + spec.original_len)
        .map(|i| {
            if norm[i] > tiny {
                acc[i] / norm[i]
            } else {
                F::zero()
            }
        })
        .collect();

    AudioBuffer::new(out, spec.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, n: usize) -> AudioBuffer<f64> {
        let samples = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioBuffer::new(samples, rate).unwrap()
    }

    fn noise(n: usize, seed: u64) -> AudioBuffer<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        AudioBuffer::new(samples, 16000).unwrap()
    }

    #[test]
    fn zero_input_gives_zero_spectrogram() {
        let buf = AudioBuffer::new(vec![0.0f64; 4096], 16000).unwrap();
        let spec = stft(&buf, StftConfig::with_window(1024).unwrap()).unwrap();
        for t in 0..spec.n_frames() {
            assert!(spec.frame(t).iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        // 1 kHz at 16 kHz, window 1024 -> bin 64
        let buf = sine(1000.0, 16000, 16000);
        let spec = stft(&buf, StftConfig::with_window(1024).unwrap()).unwrap();
        for t in 4..spec.n_frames() - 4 {
            let frame = spec.frame(t);
            let argmax = frame
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, 64, "frame {t}");
        }
    }

    #[test]
    fn parseval_energy_matches() {
        let buf = noise(32000, 7);
        let config = StftConfig::with_window(1024).unwrap();
        let spec = stft(&buf, config).unwrap();
        let window = hann_window::<f64>(1024);
        let wsq: f64 = window.iter().map(|w| w * w).sum();
        let n = config.window_size as f64;
        let mut spec_energy = 0.0;
        for t in 0..spec.n_frames() {
            let frame = spec.frame(t);
            // one-sided spectrum: double the interior bins
            spec_energy += frame[0].norm_sqr() + frame[frame.len() - 1].norm_sqr();
            for c in &frame[1..frame.len() - 1] {
                spec_energy += 2.0 * c.norm_sqr();
            }
        }
        let estimated = spec_energy * config.hop as f64 / (n * wsq);
        let actual: f64 = buf.samples().iter().map(|s| s * s).sum();
        assert!(
            (estimated - actual).abs() / actual < 0.01,
            "est {estimated} vs {actual}"
        );
    }

    #[test]
    fn istft_reconstructs() {
        for window in [32usize, 64, 128, 256, 512, 1024, 2048] {
            let buf = noise(6000, 3);
            let spec = stft(&buf, StftConfig::with_window(window).unwrap()).unwrap();
            let back = istft(&spec).unwrap();
            assert_eq!(back.len(), buf.len());
            for (a, b) in back.samples().iter().zip(buf.samples()) {
                assert!((a - b).abs() < 1e-6, "window {window}");
            }
        }
    }

    #[test]
    fn istft_is_linear() {
        let buf = noise(4000, 11);
        let config = StftConfig::with_window(512).unwrap();
        let mut spec = stft(&buf, config).unwrap();
        for t in 0..spec.n_frames() {
            for c in spec.frame_mut(t) {
                *c = *c * 2.0;
            }
        }
        let doubled = istft(&spec).unwrap();
        for (a, b) in doubled.samples().iter().zip(buf.samples()) {
            assert!((a - 2.0 * b).abs() < 1e-6);
        }
    }

    #[test]
    fn non_cola_rejected() {
        let buf = noise(4000, 2);
        let config = StftConfig::new(512, 512).unwrap();
        let spec = stft(&buf, config).unwrap();
        assert!(matches!(istft(&spec), Err(Error::NonCola { .. })));
    }

    #[test]
    fn frame_count_formula() {
        // center padding: floor(T/hop) + 1 frames
        let buf = noise(16000, 1);
        let config = StftConfig::new(1024, 256).unwrap();
        let spec = stft(&buf, config).unwrap();
        assert_eq!(spec.n_frames(), 16000 / 256 + 1);
    }
}
