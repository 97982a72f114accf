//! The training objective family as pure functions: time/mel reconstruction
//! losses, hinge adversarial and feature-matching losses on supplied
//! discriminator outputs, and the RVQ commitment loss.
//!
//! All norms are mean-reduced over elements so reported magnitudes stay
//! comparable across scales.

use crate::audio::AudioBuffer;
use crate::dsp::{mel_spectrogram, StftConfig};
use crate::error::{Error, Result};
use crate::quantizer::{rvq_encode_full, RvqQuantizer};
use crate::real::Real;

/// Which norm the reconstruction and commitment terms use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    L1PlusL2,
}

impl NormKind {
    /// Mean-reduced norm of an elementwise difference stream.
    fn reduce<F: Real>(self, diffs: impl Iterator<Item = F>, count: usize) -> F {
        if count == 0 {
            return F::zero();
        }
        let mut l1 = F::zero();
        let mut l2 = F::zero();
        for d in diffs {
            l1 += d.abs();
            l2 += d * d;
        }
        let n = F::from_usize_lossy(count);
        match self {
            NormKind::L1 => l1 / n,
            NormKind::L2 => l2 / n,
            NormKind::L1PlusL2 => l1 / n + l2 / n,
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            "l1_plus_l2" => Ok(NormKind::L1PlusL2),
            other => Err(Error::InvalidArgument(format!("unknown norm: {other}"))),
        }
    }
}

/// STFT window sizes used by the multi-scale mel loss; hop is a quarter
/// window at every scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleSet {
    window_sizes: Vec<usize>,
}

/// Mel bin count at the reference window of 1024; other windows scale
/// proportionally with a floor of 5.
pub const N_MELS_AT_1024: usize = 80;
pub const MIN_N_MELS: usize = 5;

pub fn n_mels_for_window(window: usize) -> usize {
    ((N_MELS_AT_1024 * window + 512) / 1024).max(MIN_N_MELS)
}

impl ScaleSet {
    pub fn new(window_sizes: Vec<usize>) -> Result<Self> {
        if window_sizes.is_empty() {
            return Err(Error::InvalidArgument("scale set must be non-empty".into()));
        }
        for &w in &window_sizes {
            if w < 32 || !w.is_power_of_two() {
                return Err(Error::InvalidArgument(format!(
                    "scale window must be a power of two >= 32, got {w}"
                )));
            }
        }
        Ok(Self { window_sizes })
    }

    pub fn windows(&self) -> &[usize] {
        &self.window_sizes
    }
}

impl Default for ScaleSet {
    /// Windows 2^5 .. 2^11.
    fn default() -> Self {
        Self {
            window_sizes: (5..=11).map(|p| 1usize << p).collect(),
        }
    }
}

/// Final score sequence and ordered per-layer features of one discriminator.
#[derive(Debug, Clone)]
pub struct DiscriminatorOutput<F: Real> {
    pub scores: Vec<F>,
    pub features: Vec<Vec<F>>,
}

fn mean<F: Real>(values: &[F]) -> F {
    if values.is_empty() {
        return F::zero();
    }
    values.iter().copied().sum::<F>() / F::from_usize_lossy(values.len())
}

fn hinge<F: Real>(x: F) -> F {
    x.max(F::zero())
}

/// Mean-reduced norm of the sample difference.
pub fn time_domain_loss<F: Real>(
    s: &AudioBuffer<F>,
    s_hat: &AudioBuffer<F>,
    norm: NormKind,
) -> Result<F> {
    if s.len() != s_hat.len() {
        return Err(Error::LengthMismatch(s.len(), s_hat.len()));
    }
    if s.sample_rate() != s_hat.sample_rate() {
        return Err(Error::SampleRateMismatch(s.sample_rate(), s_hat.sample_rate()));
    }
    Ok(norm.reduce(
        s.samples()
            .iter()
            .zip(s_hat.samples())
            .map(|(a, b)| *a - *b),
        s.len(),
    ))
}

/// Average over scales of the mean-reduced norm of the log-mel difference.
pub fn multi_scale_mel_loss<F: Real>(
    s: &AudioBuffer<F>,
    s_hat: &AudioBuffer<F>,
    scales: &ScaleSet,
    norm: NormKind,
) -> Result<F> {
    if s.len() != s_hat.len() {
        return Err(Error::LengthMismatch(s.len(), s_hat.len()));
    }
    if s.sample_rate() != s_hat.sample_rate() {
        return Err(Error::SampleRateMismatch(s.sample_rate(), s_hat.sample_rate()));
    }
    let max_window = *scales.windows().iter().max().unwrap();
    if s.len() < max_window {
        return Err(Error::InvalidArgument(format!(
            "signal of {} samples is shorter than the largest window {max_window}",
            s.len()
        )));
    }
    let mut total = F::zero();
    for &window in scales.windows() {
        let config = StftConfig::with_window(window)?;
        let n_mels = n_mels_for_window(window);
        let a = mel_spectrogram(s, config, n_mels, true)?;
        let b = mel_spectrogram(s_hat, config, n_mels, true)?;
        let count = a.frames.len() * n_mels;
        total += norm.reduce(
            a.frames
                .iter()
                .flatten()
                .zip(b.frames.iter().flatten())
                .map(|(x, y)| *x - *y),
            count,
        );
    }
    Ok(total / F::from_usize_lossy(scales.windows().len()))
}

/// Hinge on the mean score of each discriminator, averaged over K:
/// `(1/K) sum_k max(0, 1 - D_k(s_hat))`.
pub fn generator_adversarial_loss<F: Real>(fake: &[DiscriminatorOutput<F>]) -> Result<F> {
    if fake.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one discriminator".into(),
        ));
    }
    let total: F = fake
        .iter()
        .map(|d| hinge(F::one() - mean(&d.scores)))
        .sum();
    Ok(total / F::from_usize_lossy(fake.len()))
}

/// `(1/(K*R)) sum_{k,r} ||D_k^r(s) - D_k^r(s_hat)||_1` with mean-reduced L1
/// per layer.
pub fn feature_matching_loss<F: Real>(
    real: &[DiscriminatorOutput<F>],
    fake: &[DiscriminatorOutput<F>],
) -> Result<F> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(Error::LengthMismatch(real.len(), fake.len()));
    }
    let mut total = F::zero();
    for (r, f) in real.iter().zip(fake) {
        if r.features.len() != f.features.len() {
            return Err(Error::LengthMismatch(r.features.len(), f.features.len()));
        }
        if r.features.is_empty() {
            continue;
        }
        let mut per_disc = F::zero();
        for (rl, fl) in r.features.iter().zip(&f.features) {
            if rl.len() != fl.len() {
                return Err(Error::LengthMismatch(rl.len(), fl.len()));
            }
            per_disc += NormKind::L1.reduce(rl.iter().zip(fl).map(|(a, b)| *a - *b), rl.len());
        }
        total += per_disc / F::from_usize_lossy(r.features.len());
    }
    Ok(total / F::from_usize_lossy(real.len()))
}

/// `(1/K) sum_k [max(0, 1 + D_k(s_hat)) + max(0, 1 - D_k(s))]`.
pub fn discriminator_loss<F: Real>(
    real: &[DiscriminatorOutput<F>],
    fake: &[DiscriminatorOutput<F>],
) -> Result<F> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(Error::LengthMismatch(real.len(), fake.len()));
    }
    let total: F = real
        .iter()
        .zip(fake)
        .map(|(r, f)| hinge(F::one() + mean(&f.scores)) + hinge(F::one() - mean(&r.scores)))
        .sum();
    Ok(total / F::from_usize_lossy(real.len()))
}

/// `||E - E_hat||_1 + (1/L) sum_i ||Q_{i-1} - VQ_i(Q_{i-1})||_norm`, with the
/// residual chain shared with `rvq_encode`.
pub fn commitment_loss<F: Real>(
    frames: &[Vec<F>],
    q: &RvqQuantizer<F>,
    n_levels: usize,
    norm: NormKind,
) -> Result<F> {
    let out = rvq_encode_full(q, frames, n_levels)?;
    let count: usize = frames.iter().map(|f| f.len()).sum();

    // global term: L1 against the final reconstruction
    let global = NormKind::L1.reduce(
        frames
            .iter()
            .flatten()
            .zip(out.reconstruction.iter().flatten())
            .map(|(a, b)| *a - *b),
        count,
    );

    // per-level terms: Q_{i-1} - VQ_i(Q_{i-1}) is exactly the residual
    // left after level i
    let mut per_level = F::zero();
    for residual in &out.residuals {
        per_level += norm.reduce(residual.iter().flatten().copied(), count);
    }
    Ok(global + per_level / F::from_usize_lossy(n_levels))
}

/// Itemized weighted sum of loss terms.
#[derive(Debug, Clone)]
pub struct LossBreakdown<F: Real> {
    pub terms: Vec<(String, F, F)>,
    pub total: F,
}

/// Weighted sum with an itemized report; `terms` are `(name, weight, value)`.
pub fn composite_generator_loss<F: Real>(terms: &[(&str, F, F)]) -> LossBreakdown<F> {
    let mut total = F::zero();
    let mut out = Vec::with_capacity(terms.len());
    for &(name, weight, value) in terms {
        assert!(weight >= F::zero(), "loss weights must be non-negative");
        total += weight * value;
        out.push((name.to_string(), weight, value));
    }
    LossBreakdown { terms: out, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::Codebook;

    fn buf(samples: Vec<f64>) -> AudioBuffer<f64> {
        AudioBuffer::new(samples, 16000).unwrap()
    }

    fn disc(scores: Vec<f64>, features: Vec<Vec<f64>>) -> DiscriminatorOutput<f64> {
        DiscriminatorOutput { scores, features }
    }

    #[test]
    fn time_domain_identities() {
        let s = buf(vec![0.1, -0.2, 0.3, 0.4]);
        assert_eq!(time_domain_loss(&s, &s, NormKind::L1).unwrap(), 0.0);
        let zeros = buf(vec![0.0; 4]);
        let half = buf(vec![0.5; 4]);
        assert!((time_domain_loss(&zeros, &half, NormKind::L1).unwrap() - 0.5).abs() < 1e-15);
        assert!((time_domain_loss(&zeros, &half, NormKind::L2).unwrap() - 0.25).abs() < 1e-15);
        assert!(
            (time_domain_loss(&zeros, &half, NormKind::L1PlusL2).unwrap() - 0.75).abs() < 1e-15
        );
    }

    #[test]
    fn time_domain_length_mismatch() {
        let a = buf(vec![0.0; 4]);
        let b = buf(vec![0.0; 5]);
        assert!(time_domain_loss(&a, &b, NormKind::L1).is_err());
    }

    #[test]
    fn l1_triangle_inequality() {
        let a = buf(vec![0.0, 0.5, -0.3, 0.8]);
        let b = buf(vec![0.2, -0.1, 0.4, 0.1]);
        let c = buf(vec![-0.5, 0.3, 0.0, -0.2]);
        let ab = time_domain_loss(&a, &b, NormKind::L1).unwrap();
        let bc = time_domain_loss(&b, &c, NormKind::L1).unwrap();
        let ac = time_domain_loss(&a, &c, NormKind::L1).unwrap();
        assert!(ac <= ab + bc + 1e-15);
    }

    fn tone(freq: f64, n: usize) -> AudioBuffer<f64> {
        buf((0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin() * 0.5)
            .collect())
    }

    #[test]
    fn mel_loss_identity_and_symmetry() {
        let s = tone(440.0, 4096);
        let s_hat = tone(660.0, 4096);
        let scales = ScaleSet::default();
        assert_eq!(
            multi_scale_mel_loss(&s, &s, &scales, NormKind::L1).unwrap(),
            0.0
        );
        let ab = multi_scale_mel_loss(&s, &s_hat, &scales, NormKind::L1).unwrap();
        let ba = multi_scale_mel_loss(&s_hat, &s, &scales, NormKind::L1).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab > 0.0);
    }

    #[test]
    fn single_scale_set_equals_that_scale() {
        let s = tone(440.0, 4096);
        let s_hat = tone(500.0, 4096);
        let one = ScaleSet::new(vec![1024]).unwrap();
        let full = multi_scale_mel_loss(&s, &s_hat, &one, NormKind::L2).unwrap();
        // recompute directly at that scale
        let config = StftConfig::with_window(1024).unwrap();
        let n_mels = n_mels_for_window(1024);
        let a = mel_spectrogram(&s, config, n_mels, true).unwrap();
        let b = mel_spectrogram(&s_hat, config, n_mels, true).unwrap();
        let count = a.frames.len() * n_mels;
        let direct = NormKind::L2.reduce(
            a.frames
                .iter()
                .flatten()
                .zip(b.frames.iter().flatten())
                .map(|(x, y)| *x - *y),
            count,
        );
        assert_eq!(full, direct);
    }

    #[test]
    fn short_signal_rejected_by_mel_loss() {
        let s = tone(440.0, 100);
        let scales = ScaleSet::default();
        assert!(multi_scale_mel_loss(&s, &s, &scales, NormKind::L1).is_err());
    }

    #[test]
    fn generator_hinge_fixtures() {
        let zero = vec![disc(vec![0.0; 8], vec![])];
        assert_eq!(generator_adversarial_loss(&zero).unwrap(), 1.0);
        let sat = vec![disc(vec![2.0; 8], vec![])];
        assert_eq!(generator_adversarial_loss(&sat).unwrap(), 0.0);
        let two = vec![disc(vec![0.0; 4], vec![]), disc(vec![2.0; 4], vec![])];
        assert_eq!(generator_adversarial_loss(&two).unwrap(), 0.5);
        assert!(generator_adversarial_loss::<f64>(&[]).is_err());
    }

    #[test]
    fn feature_matching_fixtures() {
        let r = vec![disc(vec![0.0], vec![vec![1.0, 2.0], vec![0.5]])];
        assert_eq!(feature_matching_loss(&r, &r).unwrap(), 0.0);

        let real = vec![disc(vec![0.0], vec![vec![1.0, 1.0]])];
        let fake = vec![disc(vec![0.0], vec![vec![1.3, 1.3]])];
        assert!((feature_matching_loss(&real, &fake).unwrap() - 0.3).abs() < 1e-12);

        // K=1, R=2, per-layer means 0.2 and 0.4 -> 0.3
        let real = vec![disc(vec![0.0], vec![vec![0.0, 0.0], vec![0.0]])];
        let fake = vec![disc(vec![0.0], vec![vec![0.2, 0.2], vec![0.4]])];
        assert!((feature_matching_loss(&real, &fake).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn feature_shape_mismatch_rejected() {
        let real = vec![disc(vec![0.0], vec![vec![0.0, 0.0]])];
        let fake = vec![disc(vec![0.0], vec![vec![0.0]])];
        assert!(feature_matching_loss(&real, &fake).is_err());
    }

    #[test]
    fn discriminator_hinge_fixtures() {
        let real = vec![disc(vec![1.0], vec![])];
        let fake = vec![disc(vec![-1.0], vec![])];
        assert_eq!(discriminator_loss(&real, &fake).unwrap(), 0.0);

        let zeros = vec![disc(vec![0.0], vec![])];
        assert_eq!(discriminator_loss(&zeros, &zeros).unwrap(), 2.0);

        // K=2 with per-k totals 0 and 2 -> 1.0
        let real = vec![disc(vec![1.0], vec![]), disc(vec![0.0], vec![])];
        let fake = vec![disc(vec![-1.0], vec![]), disc(vec![0.0], vec![])];
        assert_eq!(discriminator_loss(&real, &fake).unwrap(), 1.0);
    }

    #[test]
    fn commitment_loss_single_frame_arithmetic() {
        let cb = Codebook::from_rows(vec![vec![0.0f64]]).unwrap();
        let q = RvqQuantizer::from_codebooks(vec![cb]).unwrap();
        let loss = commitment_loss(&[vec![0.5]], &q, 1, NormKind::L1).unwrap();
        assert!((loss - 1.0).abs() < 1e-15);
    }

    #[test]
    fn commitment_loss_zero_on_representable_input() {
        let cb1 = Codebook::from_rows(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let cb2 = Codebook::from_rows(vec![vec![0.0, 0.0], vec![0.5, 0.0]]).unwrap();
        let q = RvqQuantizer::from_codebooks(vec![cb1, cb2]).unwrap();
        // every level leaves a zero residual on these frames
        let frames = vec![vec![1.0, 1.0], vec![0.0, 0.0]];
        let loss = commitment_loss(&frames, &q, 2, NormKind::L2).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn commitment_loss_frame_order_invariant() {
        let cb = Codebook::from_rows(vec![vec![0.0f64, 0.0], vec![1.0, 1.0]]).unwrap();
        let q = RvqQuantizer::from_codebooks(vec![cb]).unwrap();
        let a = vec![vec![0.3, 0.7], vec![-0.2, 0.1], vec![0.9, 0.9]];
        let mut b = a.clone();
        b.reverse();
        let la = commitment_loss(&a, &q, 1, NormKind::L1).unwrap();
        let lb = commitment_loss(&b, &q, 1, NormKind::L1).unwrap();
        assert!((la - lb).abs() < 1e-15);
    }

    #[test]
    fn composite_loss_linearity() {
        let terms = [("time", 1.0f64, 0.4), ("mel", 2.0, 0.1)];
        let breakdown = composite_generator_loss(&terms);
        assert!((breakdown.total - 0.6).abs() < 1e-15);

        let zero = composite_generator_loss(&[("time", 0.0f64, 5.0)]);
        assert_eq!(zero.total, 0.0);

        let doubled = composite_generator_loss(&[("time", 2.0, 0.4), ("mel", 4.0, 0.1)]);
        assert!((doubled.total - 2.0 * breakdown.total).abs() < 1e-15);
    }
}
