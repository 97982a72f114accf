//! Per-frame fundamental-frequency tracking with the cumulative-mean
//! normalized difference function and parabolic interpolation.

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::real::Real;

/// Frames with a normalized-difference minimum below this are voiced.
pub const VOICING_THRESHOLD: f64 = 0.15;
/// Analysis frame length in seconds.
pub const FRAME_SECONDS: f64 = 0.04;
pub const DEFAULT_F_MIN: f64 = 70.0;
pub const DEFAULT_F_MAX: f64 = 400.0;

/// Per-frame pitch estimates; `f0[i] == 0` whenever `voiced[i]` is false.
#[derive(Debug, Clone)]
pub struct PitchTrack<F: Real> {
    pub f0: Vec<F>,
    pub voiced: Vec<bool>,
    pub hop: usize,
}

impl<F: Real> PitchTrack<F> {
    pub fn n_frames(&self) -> usize {
        self.f0.len()
    }
}

/// Track pitch over `[f_min, f_max]` Hz with the given hop.
pub fn track_pitch<F: Real>(
    buffer: &AudioBuffer<F>,
    hop: usize,
    f_min: F,
    f_max: F,
) -> Result<PitchTrack<F>> {
    let rate = buffer.sample_rate() as f64;
    let f_min_f = f_min.to_f64_lossy();
    let f_max_f = f_max.to_f64_lossy();
    if !(f_min_f > 0.0 && f_min_f < f_max_f && f_max_f < rate / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid pitch range {f_min_f}..{f_max_f} at rate {rate}"
        )));
    }
    if hop == 0 {
        return Err(Error::InvalidArgument("hop must be > 0".into()));
    }

    let frame_len = (FRAME_SECONDS * rate).round() as usize;
    // integration window; lags up to tau_max must fit inside the frame
    let w = frame_len / 2;
    let tau_min = (rate / f_max_f).ceil() as usize;
    let tau_max = (rate / f_min_f).floor() as usize;
    if tau_max >= w {
        return Err(Error::InvalidArgument(format!(
            "f_min {f_min_f} too low for a {FRAME_SECONDS}s frame at rate {rate}"
        )));
    }

    let x = buffer.samples();
    let n_frames = if x.len() >= frame_len {
        (x.len() - frame_len) / hop + 1
    } else {
        0
    };

    let threshold = F::from_f64_lossy(VOICING_THRESHOLD);
    let mut f0 = Vec::with_capacity(n_frames);
    let mut voiced = Vec::with_capacity(n_frames);
    let mut diff = vec![F::zero(); tau_max + 1];
    let mut cmnd = vec![F::one(); tau_max + 1];

    for t in 0..n_frames {
        let frame = &x[t * hop..t * hop + frame_len];
        for (tau, d) in diff.iter_mut().enumerate().skip(1) {
            let mut acc = F::zero();
            for j in 0..w {
                let delta = frame[j] - frame[j + tau];
                acc += delta * delta;
            }
            *d = acc;
        }
        // cumulative-mean normalization
        let mut running = F::zero();
        for tau in 1..=tau_max {
            running += diff[tau];
            cmnd[tau] = if running > F::zero() {
                diff[tau] * F::from_usize_lossy(tau) / running
            } else {
                F::one()
            };
        }

        // first dip below threshold, descended to its local minimum
        let mut best: Option<usize> = None;
        let mut tau = tau_min;
        while tau <= tau_max {
            if cmnd[tau] < threshold {
                while tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau] {
                    tau += 1;
                }
                best = Some(tau);
                break;
            }
            tau += 1;
        }

        match best {
            Some(tau) => {
                let refined = parabolic_interp(&cmnd, tau, tau_min, tau_max);
                let hz = F::from_f64_lossy(rate) / refined;
                voiced.push(true);
                f0.push(hz.max(f_min).min(f_max));
            }
            None => {
                voiced.push(false);
                f0.push(F::zero());
            }
        }
    }

    Ok(PitchTrack { f0, voiced, hop })
}

/// Parabolic refinement of a lag estimate from its CMND neighborhood.
fn parabolic_interp<F: Real>(cmnd: &[F], tau: usize, tau_min: usize, tau_max: usize) -> F {
    if tau <= tau_min || tau >= tau_max {
        return F::from_usize_lossy(tau);
    }
    let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
    let denom = a + c - (b + b);
    if denom == F::zero() {
        return F::from_usize_lossy(tau);
    }
    let half = F::from_f64_lossy(0.5);
    let offset = half * (a - c) / denom;
    F::from_usize_lossy(tau) + offset.max(-half).min(half)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sawtooth(freq: f64, rate: u32, seconds: f64) -> AudioBuffer<f64> {
        let n = (rate as f64 * seconds) as usize;
        let samples = (0..n)
            .map(|i| {
                let phase = (freq * i as f64 / rate as f64).fract();
                2.0 * phase - 1.0
            })
            .collect();
        AudioBuffer::new(samples, rate).unwrap()
    }

    #[test]
    fn sawtooth_220_tracked_within_1hz() {
        let buf = sawtooth(220.0, 16000, 1.0);
        let track = track_pitch(&buf, 160, 70.0, 400.0).unwrap();
        assert!(track.n_frames() > 10);
        for t in 2..track.n_frames() - 2 {
            assert!(track.voiced[t], "frame {t} unvoiced");
            assert!(
                (track.f0[t] - 220.0).abs() < 1.0,
                "frame {t}: {}",
                track.f0[t]
            );
        }
    }

    #[test]
    fn white_noise_mostly_unvoiced() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let samples: Vec<f64> = (0..16000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let buf = AudioBuffer::new(samples, 16000).unwrap();
        let track = track_pitch(&buf, 160, 70.0, 400.0).unwrap();
        let voiced = track.voiced.iter().filter(|&&v| v).count();
        assert!(
            (voiced as f64) < 0.2 * track.n_frames() as f64,
            "{voiced}/{}",
            track.n_frames()
        );
    }

    #[test]
    fn silence_is_unvoiced() {
        let buf = AudioBuffer::new(vec![0.0f64; 16000], 16000).unwrap();
        let track = track_pitch(&buf, 160, 70.0, 400.0).unwrap();
        assert!(track.voiced.iter().all(|&v| !v));
        assert!(track.f0.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn shift_by_hop_shifts_frames() {
        let hop = 160;
        let buf = sawtooth(150.0, 16000, 1.0);
        let mut delayed_samples = vec![0.0f64; hop];
        delayed_samples.extend_from_slice(buf.samples());
        let delayed = AudioBuffer::new(delayed_samples, 16000).unwrap();
        let a = track_pitch(&buf, hop, 70.0, 400.0).unwrap();
        let b = track_pitch(&delayed, hop, 70.0, 400.0).unwrap();
        for t in 2..a.n_frames() - 2 {
            assert_eq!(a.voiced[t], b.voiced[t + 1]);
            assert!((a.f0[t] - b.f0[t + 1]).abs() < 0.5);
        }
    }

    #[test]
    fn invalid_range_rejected() {
        let buf = sawtooth(220.0, 16000, 0.2);
        assert!(track_pitch(&buf, 160, 400.0, 70.0).is_err());
        assert!(track_pitch(&buf, 160, 70.0, 9000.0).is_err());
    }
}
