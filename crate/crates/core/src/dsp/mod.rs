//! Spectral analysis and synthesis primitives shared by the losses,
//! metrics, and codec pipeline.

mod griffin_lim;
mod mel;
mod pitch;
mod stft;

pub use griffin_lim::{griffin_lim, griffin_lim_with_len};
pub use mel::{
    hz_to_mel, mel_cepstrum, mel_filterbank, mel_spectrogram, mel_to_hz, MelSpectrogram,
    LOG_FLOOR,
};
pub use pitch::{
    track_pitch, PitchTrack, DEFAULT_F_MAX, DEFAULT_F_MIN, FRAME_SECONDS, VOICING_THRESHOLD,
};
pub use stft::{hann_window, istft, stft, Spectrogram, StftConfig};
