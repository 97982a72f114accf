//! Residual-vector-quantization codec kernel and objective audio
//! evaluation toolkit.
//!
//! The crate is organized as a small set of layers:
//!
//! * [`audio`] — WAV I/O, resampling, and the canonical mono [`audio::AudioBuffer`]
//! * [`dsp`] — STFT/iSTFT, mel filterbank and cepstrum, pitch tracking, Griffin-Lim
//! * [`quantizer`] — VQ / RVQ / GRVQ with k-means init and EMA codebook learning
//! * [`losses`] — reconstruction, adversarial, feature-matching, and commitment losses
//! * [`metrics`] — intrusive reference/degraded metrics (MCD, F0, SI-SNR, CI-SDR, STOI)
//! * [`codec`] — the serial encode/quantize/decode pipeline with serialization
//!
//! All numeric kernels are generic over the scalar type via [`real::Real`];
//! `f64` aliases are exported at the crate root.

pub mod audio;
pub mod codec;
pub mod dsp;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod quantizer;
pub mod real;

pub use error::{Error, Result};
pub use real::Real;

/// Default scalar used by the CLI and the file formats' in-memory side.
pub type Sample = f64;

pub type AudioBuffer32 = audio::AudioBuffer<f32>;
pub type AudioBuffer64 = audio::AudioBuffer<f64>;
pub type Spectrogram32 = dsp::Spectrogram<f32>;
pub type Spectrogram64 = dsp::Spectrogram<f64>;
pub type Codebook32 = quantizer::Codebook<f32>;
pub type Codebook64 = quantizer::Codebook<f64>;
pub type RvqQuantizer32 = quantizer::RvqQuantizer<f32>;
pub type RvqQuantizer64 = quantizer::RvqQuantizer<f64>;
pub type GrvqQuantizer32 = quantizer::GrvqQuantizer<f32>;
pub type GrvqQuantizer64 = quantizer::GrvqQuantizer<f64>;
pub type SpectralCodec32 = codec::SpectralCodec<f32>;
pub type SpectralCodec64 = codec::SpectralCodec<f64>;
