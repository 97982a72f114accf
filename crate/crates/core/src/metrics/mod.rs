//! Intrusive full-reference evaluation: score a (reference, degraded)
//! pair with MCD, F0-RMSE, F0-CORR, SI-SNR, CI-SDR, and STOI.
//!
//! Each metric runs independently; a metric that cannot be evaluated on
//! a given pair is reported as undefined with a machine-readable reason
//! instead of failing the whole report.

mod f0;
mod mcd;
mod sdr;
mod stoi;

pub use f0::{f0_corr, f0_rmse};
pub use mcd::{mcd, mcd_from_cepstra, DEFAULT_MCD_ORDER, MCD_N_MELS, MCD_WINDOW};
pub use sdr::{ci_sdr, si_snr, DEFAULT_CI_SDR_TAPS, SDR_CLAMP_DB};
pub use stoi::{stoi, STOI_FS};

use std::fmt;
use std::str::FromStr;

use crate::audio::{resample, AudioBuffer};
use crate::error::{Error, Result};
use crate::real::Real;

/// The supported intrusive metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricId {
    Mcd,
    F0Rmse,
    F0Corr,
    SiSnr,
    CiSdr,
    Stoi,
}

impl MetricId {
    /// All metrics, in canonical report order.
    pub const ALL: [MetricId; 6] = [
        MetricId::Mcd,
        MetricId::F0Rmse,
        MetricId::F0Corr,
        MetricId::SiSnr,
        MetricId::CiSdr,
        MetricId::Stoi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Mcd => "mcd",
            MetricId::F0Rmse => "f0_rmse",
            MetricId::F0Corr => "f0_corr",
            MetricId::SiSnr => "si_snr",
            MetricId::CiSdr => "ci_sdr",
            MetricId::Stoi => "stoi",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcd" => Ok(MetricId::Mcd),
            "f0_rmse" => Ok(MetricId::F0Rmse),
            "f0_corr" => Ok(MetricId::F0Corr),
            "si_snr" => Ok(MetricId::SiSnr),
            "ci_sdr" => Ok(MetricId::CiSdr),
            "stoi" => Ok(MetricId::Stoi),
            other => Err(Error::InvalidArgument(format!("unknown metric: {other}"))),
        }
    }
}

/// How to reconcile inputs recorded at different sample rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResamplePolicy {
    /// Resample the higher-rate signal down to the lower rate.
    #[default]
    ToMin,
    /// Refuse mismatched rates.
    Strict,
}

/// Per-report evaluation parameters.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Metrics to run, deduplicated into canonical order at build time.
    pub metrics: Vec<MetricId>,
    /// Cepstral order for MCD (coefficients 1..=order enter the distance).
    pub mcd_order: usize,
    /// FIR length for CI-SDR.
    pub ci_sdr_taps: usize,
    pub resample_policy: ResamplePolicy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            metrics: MetricId::ALL.to_vec(),
            mcd_order: DEFAULT_MCD_ORDER,
            ci_sdr_taps: DEFAULT_CI_SDR_TAPS,
            resample_policy: ResamplePolicy::ToMin,
        }
    }
}

impl EvalConfig {
    /// Config running only the named metrics.
    pub fn with_metrics(metrics: &[MetricId]) -> Self {
        let mut ordered: Vec<MetricId> = MetricId::ALL
            .iter()
            .copied()
            .filter(|m| metrics.contains(m))
            .collect();
        if ordered.is_empty() {
            ordered = MetricId::ALL.to_vec();
        }
        EvalConfig {
            metrics: ordered,
            ..EvalConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.mcd_order == 0 || self.mcd_order >= MCD_N_MELS {
            return Err(Error::InvalidArgument(format!(
                "cepstral order must be in 1..{MCD_N_MELS}"
            )));
        }
        if self.ci_sdr_taps == 0 {
            return Err(Error::InvalidArgument("ci_sdr_taps must be >= 1".into()));
        }
        Ok(())
    }
}

/// One scored metric: a value, or a reason it is undefined on this pair.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricValue {
    Defined(f64),
    Undefined(String),
}

/// Structured result of scoring one pair.
#[derive(Debug, Clone)]
pub struct MetricReport {
    /// (metric, value) in the order requested by the config.
    pub entries: Vec<(MetricId, MetricValue)>,
    /// Rate both signals were evaluated at.
    pub sample_rate: u32,
    /// Common length in samples after trimming.
    pub n_samples: usize,
    /// True when an input below 10 kHz was upsampled for STOI.
    pub stoi_upsampled: bool,
}

impl MetricReport {
    pub fn value(&self, id: MetricId) -> Option<&MetricValue> {
        self.entries.iter().find(|(m, _)| *m == id).map(|(_, v)| v)
    }
}

/// Scores one pair. Mismatched rates are reconciled per the resample
/// policy, lengths are trimmed to the shorter signal, and every requested
/// metric appears in the report exactly once.
pub fn evaluate_pair<F: Real>(
    reference: &AudioBuffer<F>,
    degraded: &AudioBuffer<F>,
    config: &EvalConfig,
) -> Result<MetricReport> {
    config.validate()?;
    let (reference, degraded) = match (
        config.resample_policy,
        reference.sample_rate(),
        degraded.sample_rate(),
    ) {
        (_, a, b) if a == b => (reference.clone(), degraded.clone()),
        (ResamplePolicy::Strict, a, b) => return Err(Error::SampleRateMismatch(a, b)),
        (ResamplePolicy::ToMin, a, b) => {
            let target = a.min(b);
            (resample(reference, target)?, resample(degraded, target)?)
        }
    };
    let rate = reference.sample_rate();
    let n = reference.len().min(degraded.len());
    if n == 0 {
        return Err(Error::EmptyBuffer);
    }
    let reference = AudioBuffer::new(reference.samples()[..n].to_vec(), rate)?;
    let degraded = AudioBuffer::new(degraded.samples()[..n].to_vec(), rate)?;

    let mut entries = Vec::with_capacity(config.metrics.len());
    for &id in &config.metrics {
        let outcome = match id {
            MetricId::Mcd => mcd(&reference, &degraded, config.mcd_order),
            MetricId::F0Rmse => f0_rmse(&reference, &degraded),
            MetricId::F0Corr => f0_corr(&reference, &degraded),
            MetricId::SiSnr => si_snr(&reference, &degraded),
            MetricId::CiSdr => ci_sdr(&reference, &degraded, config.ci_sdr_taps),
            MetricId::Stoi => stoi(&reference, &degraded),
        };
        let value = match outcome {
            Ok(v) => MetricValue::Defined(v.to_f64_lossy()),
            Err(Error::MetricUndefined(reason)) => MetricValue::Undefined(reason),
            Err(e) => MetricValue::Undefined(match e {
                Error::InvalidArgument(_) | Error::InsufficientData { .. } => {
                    "insufficient_data".to_string()
                }
                _ => "evaluation_failed".to_string(),
            }),
        };
        entries.push((id, value));
    }
    Ok(MetricReport {
        entries,
        sample_rate: rate,
        n_samples: n,
        stoi_upsampled: config.metrics.contains(&MetricId::Stoi) && rate < STOI_FS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn voiced_tone(rate: u32, seconds: f64) -> AudioBuffer<f64> {
        let n = (rate as f64 * seconds) as usize;
        // slow vibrato keeps the pitch track non-constant so f0_corr is defined
        let mut phase = 0.0f64;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / rate as f64;
                let f = 220.0 + 15.0 * (2.0 * std::f64::consts::PI * 2.0 * t).sin();
                phase += f / rate as f64;
                2.0 * phase.fract() - 1.0
            })
            .collect();
        AudioBuffer::new(samples, rate).unwrap()
    }

    #[test]
    fn identity_pair_hits_all_trivial_values() {
        let buf = voiced_tone(16000, 2.0);
        let report = evaluate_pair(&buf, &buf, &EvalConfig::default()).unwrap();
        let get = |id: MetricId| match report.value(id).unwrap() {
            MetricValue::Defined(v) => *v,
            MetricValue::Undefined(r) => panic!("{id} undefined: {r}"),
        };
        assert_eq!(get(MetricId::Mcd), 0.0);
        assert_eq!(get(MetricId::F0Rmse), 0.0);
        assert_eq!(get(MetricId::SiSnr), 60.0);
        assert_eq!(get(MetricId::CiSdr), 60.0);
        assert!((get(MetricId::Stoi) - 1.0).abs() < 1e-6);
        assert!((get(MetricId::F0Corr) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn selection_yields_exactly_requested_metrics() {
        let buf = voiced_tone(16000, 1.0);
        let config = EvalConfig::with_metrics(&[MetricId::SiSnr]);
        let report = evaluate_pair(&buf, &buf, &config).unwrap();
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.entries[0].0, MetricId::SiSnr);
    }

    #[test]
    fn to_min_policy_evaluates_at_lower_rate() {
        let hi = voiced_tone(48000, 1.0);
        let lo = voiced_tone(16000, 1.0);
        let config = EvalConfig::with_metrics(&[MetricId::SiSnr]);
        let report = evaluate_pair(&hi, &lo, &config).unwrap();
        assert_eq!(report.sample_rate, 16000);
    }

    #[test]
    fn strict_policy_rejects_mismatched_rates() {
        let hi = voiced_tone(48000, 1.0);
        let lo = voiced_tone(16000, 1.0);
        let config = EvalConfig {
            resample_policy: ResamplePolicy::Strict,
            ..EvalConfig::default()
        };
        assert!(matches!(
            evaluate_pair(&hi, &lo, &config),
            Err(Error::SampleRateMismatch(..))
        ));
    }

    #[test]
    fn failures_never_abort_the_report() {
        // white noise is unvoiced, so both pitch metrics go undefined
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = AudioBuffer::new(
            (0..32000).map(|_| rng.gen_range(-1.0f64..1.0)).collect(),
            16000,
        )
        .unwrap();
        let report = evaluate_pair(&noise, &noise, &EvalConfig::default()).unwrap();
        assert_eq!(report.entries.len(), MetricId::ALL.len());
        assert!(matches!(
            report.value(MetricId::F0Rmse).unwrap(),
            MetricValue::Undefined(_)
        ));
        assert!(matches!(
            report.value(MetricId::SiSnr).unwrap(),
            MetricValue::Defined(v) if *v == 60.0
        ));
    }

    #[test]
    fn metric_names_round_trip() {
        for id in MetricId::ALL {
            assert_eq!(id.name().parse::<MetricId>().unwrap(), id);
        }
        assert!("pesq".parse::<MetricId>().is_err());
    }

    #[test]
    fn upsampling_flagged_for_low_rate_stoi() {
        let buf = voiced_tone(8000, 2.0);
        let report = evaluate_pair(&buf, &buf, &EvalConfig::default()).unwrap();
        assert!(report.stoi_upsampled);
    }
}
