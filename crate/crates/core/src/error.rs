use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the codec kernel and evaluation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a RIFF/WAVE file: {0}")]
    NotWave(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("truncated chunk: {0}")]
    TruncatedChunk(String),
    #[error("empty audio buffer")]
    EmptyBuffer,
    #[error("invalid sample rate: {0}")]
    InvalidSampleRate(i64),
    #[error("sample rate mismatch: {0} vs {1}")]
    SampleRateMismatch(u32, u32),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("window size {window} exceeds padded signal length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("STFT config violates COLA: window {window}, hop {hop}")]
    NonCola { window: usize, hop: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("code index {index} out of range for codebook of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("insufficient data: need at least {need} frames, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("bad magic: expected {expected:?}, got {got:?}")]
    BadMagic { expected: [u8; 4], got: [u8; 4] },
    #[error("unsupported version: {0}")]
    UnsupportedVersion(u16),
    #[error("truncated data: {0}")]
    Truncated(String),
    #[error("stream header does not match model: {0}")]
    HeaderMismatch(String),
    #[error("corrupt codes: {0}")]
    CorruptCodes(String),
    /// A metric could not be evaluated on this pair; the payload is a
    /// machine-readable reason code (e.g. `no_co_voiced_frames`).
    #[error("metric undefined: {0}")]
    MetricUndefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;
