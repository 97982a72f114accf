//! Scale-invariant SNR and convolutive-transfer-function-invariant SDR.

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::real::Real;

/// Clamp for ratio metrics so exact matches stay finite.
pub const SDR_CLAMP_DB: f64 = 60.0;
/// Default FIR length for CI-SDR.
pub const DEFAULT_CI_SDR_TAPS: usize = 512;

fn clamp_db<F: Real>(num: F, den: F) -> F {
    let hi = F::from_f64_lossy(SDR_CLAMP_DB);
    if den <= F::zero() {
        return hi;
    }
    if num <= F::zero() {
        return -hi;
    }
    let ten = F::from_f64_lossy(10.0);
    (ten * (num / den).log10()).max(-hi).min(hi)
}

/// SI-SNR in dB: zero-mean both signals, project the estimate onto the
/// reference, and compare projection energy to the leftover. Clamped to
/// +-60 dB.
pub fn si_snr<F: Real>(reference: &AudioBuffer<F>, degraded: &AudioBuffer<F>) -> Result<F> {
    if reference.sample_rate() != degraded.sample_rate() {
        return Err(Error::SampleRateMismatch(
            reference.sample_rate(),
            degraded.sample_rate(),
        ));
    }
    if reference.len() != degraded.len() {
        return Err(Error::LengthMismatch(reference.len(), degraded.len()));
    }
    let n = reference.len();
    if n == 0 {
        return Err(Error::EmptyBuffer);
    }
    let nf = F::from_usize_lossy(n);
    let mean_s = reference.samples().iter().copied().sum::<F>() / nf;
    let mean_e = degraded.samples().iter().copied().sum::<F>() / nf;

    let mut dot = F::zero();
    let mut s_energy = F::zero();
    for (&s, &e) in reference.samples().iter().zip(degraded.samples()) {
        let s = s - mean_s;
        let e = e - mean_e;
        dot += s * e;
        s_energy += s * s;
    }
    if s_energy == F::zero() {
        return Err(Error::MetricUndefined("zero_reference".into()));
    }
    let gain = dot / s_energy;
    let mut target_energy = F::zero();
    let mut error_energy = F::zero();
    for (&s, &e) in reference.samples().iter().zip(degraded.samples()) {
        let s = s - mean_s;
        let e = e - mean_e;
        let t = gain * s;
        target_energy += t * t;
        let err = e - t;
        error_energy += err * err;
    }
    Ok(clamp_db(target_energy, error_energy))
}

/// CI-SDR in dB: fit the least-squares FIR filter of `taps` coefficients
/// from reference to estimate, then compare filtered-reference energy to
/// the residual. Clamped to +-60 dB.
pub fn ci_sdr<F: Real>(
    reference: &AudioBuffer<F>,
    degraded: &AudioBuffer<F>,
    taps: usize,
) -> Result<F> {
    if reference.sample_rate() != degraded.sample_rate() {
        return Err(Error::SampleRateMismatch(
            reference.sample_rate(),
            degraded.sample_rate(),
        ));
    }
    if taps == 0 {
        return Err(Error::InvalidArgument("taps must be >= 1".into()));
    }
    let s = reference.samples();
    let e = degraded.samples();
    let n_out = s.len().min(e.len());
    if n_out <= taps {
        return Err(Error::InvalidArgument(format!(
            "signal of {n_out} samples is not longer than the {taps}-tap filter"
        )));
    }
    let ref_energy: F = s.iter().map(|&v| v * v).sum();
    if ref_energy == F::zero() {
        return Err(Error::MetricUndefined("zero_reference".into()));
    }

    // Exact Gram of the delayed references over the estimate's support:
    // gram[i][j] = sum_n s[n-i] s[n-j], n in 0..n_out. Filled one diagonal
    // at a time via prefix sums of the lagged product.
    let mut gram = vec![vec![F::zero(); taps]; taps];
    let mut prefix = vec![F::zero(); s.len() + 1];
    for d in 0..taps {
        for m in 0..s.len().saturating_sub(d) {
            prefix[m + 1] = prefix[m] + s[m] * s[m + d];
        }
        let valid = s.len().saturating_sub(d);
        for i in d..taps {
            // m = n - i ranges over 0..=min(n_out-1-i, len-1-d)
            let upper = (n_out - 1 - i).min(valid.saturating_sub(1));
            let val = if valid == 0 {
                F::zero()
            } else {
                prefix[upper + 1]
            };
            gram[i][i - d] = val;
            gram[i - d][i] = val;
        }
    }
    // rhs[i] = sum_n e[n] s[n-i]
    let mut rhs = vec![F::zero(); taps];
    for (i, r) in rhs.iter_mut().enumerate() {
        let mut acc = F::zero();
        for n in i..n_out {
            acc += e[n] * s[n - i];
        }
        *r = acc;
    }

    // tiny ridge keeps the solve well posed on degenerate references
    let ridge = gram
        .iter()
        .enumerate()
        .map(|(i, row)| row[i])
        .fold(F::zero(), |a, b| a.max(b))
        * F::from_f64_lossy(1e-12)
        + F::from_f64_lossy(1e-30);
    for i in 0..taps {
        gram[i][i] += ridge;
    }
    let h = solve_spd(gram, &rhs)?;

    let mut target_energy = F::zero();
    let mut error_energy = F::zero();
    for n in 0..n_out {
        let mut y = F::zero();
        let k_max = n.min(taps - 1);
        for k in 0..=k_max {
            y += h[k] * s[n - k];
        }
        target_energy += y * y;
        let err = e[n] - y;
        error_energy += err * err;
    }
    Ok(clamp_db(target_energy, error_energy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buf(samples: Vec<f64>) -> AudioBuffer<f64> {
        AudioBuffer::new(samples, 16000).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-0.9..0.9)).collect()
    }

    #[test]
    fn orthogonal_equal_norm_noise_gives_zero_db() {
        let s = buf(vec![1.0, -1.0, 1.0, -1.0]);
        let e = buf(vec![2.0, 0.0, 0.0, -2.0]); // s + [1,1,-1,-1]
        let v = si_snr(&s, &e).unwrap();
        assert!(v.abs() < 1e-9, "si-snr = {v}");
    }

    #[test]
    fn scaled_copy_hits_plus_60() {
        let s = buf(noise(1000, 1));
        let e = buf(s.samples().iter().map(|&v| 0.5 * v).collect());
        assert_eq!(si_snr(&s, &e).unwrap(), 60.0);
    }

    #[test]
    fn si_snr_scale_invariance_identity() {
        let clean = noise(2000, 2);
        let noise_v = noise(2000, 3);
        let alpha = 1.7;
        let s = buf(clean.clone());
        let a = buf(clean
            .iter()
            .zip(&noise_v)
            .map(|(c, n)| alpha * c + n)
            .collect());
        let b = buf(clean
            .iter()
            .zip(&noise_v)
            .map(|(c, n)| c + n / alpha)
            .collect());
        let va = si_snr(&s, &a).unwrap();
        let vb = si_snr(&s, &b).unwrap();
        assert!((va - vb).abs() < 1e-9);
    }

    #[test]
    fn zero_reference_undefined() {
        let s = buf(vec![0.0; 100]);
        let e = buf(noise(100, 4));
        assert!(matches!(si_snr(&s, &e), Err(Error::MetricUndefined(_))));
        assert!(matches!(
            ci_sdr(&s, &e, 8),
            Err(Error::MetricUndefined(_))
        ));
    }

    #[test]
    fn delay_absorbed_by_filter() {
        let clean = noise(4000, 5);
        let mut delayed = vec![0.0; 10];
        delayed.extend_from_slice(&clean[..3990]);
        let v = ci_sdr(&buf(clean), &buf(delayed), 512).unwrap();
        assert_eq!(v, 60.0);
    }

    #[test]
    fn exact_match_hits_clamp() {
        let s = buf(noise(2000, 6));
        assert_eq!(ci_sdr(&s, &s, 512).unwrap(), 60.0);
    }

    #[test]
    fn single_tap_matches_si_snr_on_zero_mean() {
        let mut clean = noise(3000, 7);
        let mean = clean.iter().sum::<f64>() / clean.len() as f64;
        clean.iter_mut().for_each(|v| *v -= mean);
        let mut degraded: Vec<f64> = clean
            .iter()
            .zip(noise(3000, 8))
            .map(|(c, n)| c + 0.3 * n)
            .collect();
        let mean = degraded.iter().sum::<f64>() / degraded.len() as f64;
        degraded.iter_mut().for_each(|v| *v -= mean);
        let a = ci_sdr(&buf(clean.clone()), &buf(degraded.clone()), 1).unwrap();
        let b = si_snr(&buf(clean), &buf(degraded)).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn more_taps_never_fit_worse() {
        let clean = noise(3000, 9);
        let degraded: Vec<f64> = (0..3000)
            .map(|n| {
                let a = clean[n];
                let b = if n >= 3 { clean[n - 3] } else { 0.0 };
                0.8 * a + 0.4 * b
            })
            .zip(noise(3000, 10))
            .map(|(v, w)| v + 0.05 * w)
            .collect();
        let mut prev = f64::NEG_INFINITY;
        for taps in [1usize, 2, 4, 8, 32, 128] {
            let v = ci_sdr(&buf(clean.clone()), &buf(degraded.clone()), taps).unwrap();
            assert!(v >= prev - 1e-6, "taps {taps}: {v} < {prev}");
            prev = v;
        }
    }
}
