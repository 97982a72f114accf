//! Band-limited sample-rate conversion: windowed-sinc interpolation with a
//! Kaiser window (beta = 8.6, 64 taps per output sample).

use crate::error::{Error, Result};
use crate::real::Real;

use super::AudioBuffer;

const KAISER_BETA: f64 = 8.6;
const TAPS: usize = 64;

/// Zeroth-order modified Bessel function of the first kind (series form).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-16 {
            break;
        }
    }
    sum
}

fn kaiser(t: f64, half_width: f64) -> f64 {
    let r = t / half_width;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / bessel_i0(KAISER_BETA)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Convert `buffer` to `target_rate`. Output length is
/// `round(len * target / source)`. Same-rate input is returned unchanged.
pub fn resample<F: Real>(buffer: &AudioBuffer<F>, target_rate: u32) -> Result<AudioBuffer<F>> {
    if target_rate == 0 {
        return Err(Error::InvalidSampleRate(0));
    }
    let source_rate = buffer.sample_rate();
    if target_rate == source_rate {
        return Ok(buffer.clone());
    }
    let ratio = target_rate as f64 / source_rate as f64;
    let out_len = (buffer.len() as f64 * ratio).round() as usize;
    let x = buffer.samples();

    // Cutoff at the lower Nyquist, expressed in source-sample units.
    let cutoff = 0.5 * ratio.min(1.0);
    // Widen the kernel when downsampling so the transition band stays sharp.
    let half_width = (TAPS as f64 / 2.0) / ratio.min(1.0);

    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let center = n as f64 / ratio;
        let lo = ((center - half_width).ceil() as i64).max(0) as usize;
        let hi = ((center + half_width).floor() as i64).min(x.len() as i64 - 1);
        let mut acc = 0.0f64;
        if hi >= 0 {
            for k in lo..=hi as usize {
                let t = center - k as f64;
                let w = 2.0 * cutoff * sinc(2.0 * cutoff * t) * kaiser(t, half_width);
                acc += x[k].to_f64_lossy() * w;
            }
        }
        out.push(F::from_f64_lossy(acc));
    }

    AudioBuffer::new(out, target_rate)
}
