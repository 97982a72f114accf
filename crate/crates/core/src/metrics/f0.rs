//! Pitch-contour metrics over frames voiced in both signals.

use crate::audio::AudioBuffer;
use crate::dsp::{track_pitch, DEFAULT_F_MAX, DEFAULT_F_MIN};
use crate::error::{Error, Result};
use crate::real::Real;

/// Pitch-analysis hop: 10 ms.
fn pitch_hop(sample_rate: u32) -> usize {
    (sample_rate as usize / 100).max(1)
}

fn co_voiced_f0<F: Real>(
    reference: &AudioBuffer<F>,
    degraded: &AudioBuffer<F>,
) -> Result<(Vec<F>, Vec<F>)> {
    if reference.sample_rate() != degraded.sample_rate() {
        return Err(Error::SampleRateMismatch(
            reference.sample_rate(),
            degraded.sample_rate(),
        ));
    }
    let hop = pitch_hop(reference.sample_rate());
    let f_min = F::from_f64_lossy(DEFAULT_F_MIN);
    let f_max = F::from_f64_lossy(DEFAULT_F_MAX);
    let ref_track = track_pitch(reference, hop, f_min, f_max)?;
    let deg_track = track_pitch(degraded, hop, f_min, f_max)?;
    let n = ref_track.n_frames().min(deg_track.n_frames());
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        if ref_track.voiced[i] && deg_track.voiced[i] {
            a.push(ref_track.f0[i]);
            b.push(deg_track.f0[i]);
        }
    }
    Ok((a, b))
}

/// RMSE in Hz over co-voiced frames.
pub fn f0_rmse<F: Real>(reference: &AudioBuffer<F>, degraded: &AudioBuffer<F>) -> Result<F> {
    let (a, b) = co_voiced_f0(reference, degraded)?;
    if a.is_empty() {
        return Err(Error::MetricUndefined("no_co_voiced_frames".into()));
    }
    let sum: F = a.iter().zip(&b).map(|(x, y)| (*x - *y) * (*x - *y)).sum();
    Ok((sum / F::from_usize_lossy(a.len())).sqrt())
}

/// Pearson correlation of f0 over co-voiced frames.
pub fn f0_corr<F: Real>(reference: &AudioBuffer<F>, degraded: &AudioBuffer<F>) -> Result<F> {
    let (a, b) = co_voiced_f0(reference, degraded)?;
    if a.len() < 2 {
        return Err(Error::MetricUndefined("too_few_co_voiced_frames".into()));
    }
    let n = F::from_usize_lossy(a.len());
    let mean_a = a.iter().copied().sum::<F>() / n;
    let mean_b = b.iter().copied().sum::<F>() / n;
    let mut cov = F::zero();
    let mut var_a = F::zero();
    let mut var_b = F::zero();
    for (x, y) in a.iter().zip(&b) {
        let da = *x - mean_a;
        let db = *y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    // constant tracks leave a few-ulp residue around the rounded mean, so
    // test variance against a rounding-scaled bound instead of exact zero
    let tol = F::epsilon() * F::from_f64_lossy(16.0);
    let floor_a = n * (tol * mean_a.abs()) * (tol * mean_a.abs());
    let floor_b = n * (tol * mean_b.abs()) * (tol * mean_b.abs());
    if var_a <= floor_a || var_b <= floor_b {
        return Err(Error::MetricUndefined("zero_variance".into()));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}
