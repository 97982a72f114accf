//! Serial codec pipeline: log-mel analysis, residual quantization, and
//! pseudo-inverse mel inversion followed by Griffin-Lim synthesis, plus
//! canonical model and bitstream serialization.

mod format;

pub use format::{
    load_model, load_stream, save_model, save_stream, FORMAT_VERSION, MODEL_MAGIC, STREAM_MAGIC,
};

use crate::audio::AudioBuffer;
use crate::dsp::{griffin_lim_with_len, mel_filterbank, mel_spectrogram, StftConfig};
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::losses::{commitment_loss, NormKind};
use crate::quantizer::{
    grvq_decode, grvq_encode, levels_for_bitrate, rvq_encode_full, train_grvq, Codebook,
    CodeSequence, GrvqQuantizer, RvqQuantizer, TrainConfig,
};
use crate::real::Real;

pub const DEFAULT_WINDOW: usize = 1024;
pub const DEFAULT_HOP: usize = 320;
pub const DEFAULT_N_MELS: usize = 80;
pub const DEFAULT_N_LEVELS: usize = 32;
pub const DEFAULT_CODEBOOK_SIZE: usize = 1024;
pub const DEFAULT_GRIFFIN_LIM_ITERS: usize = 60;
/// Ridge term stabilizing the mel pseudo-inverse.
pub const MEL_PINV_RIDGE: f64 = 1e-8;

/// Analysis and training parameters for [`train_codec`].
#[derive(Debug, Clone)]
pub struct CodecConfig {
    pub window: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_levels: usize,
    pub codebook_size: usize,
    pub n_groups: usize,
    pub epochs: usize,
    pub griffin_lim_iters: usize,
    pub seed: u64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            window: DEFAULT_WINDOW,
            hop: DEFAULT_HOP,
            n_mels: DEFAULT_N_MELS,
            n_levels: DEFAULT_N_LEVELS,
            codebook_size: DEFAULT_CODEBOOK_SIZE,
            n_groups: 1,
            epochs: 8,
            griffin_lim_iters: DEFAULT_GRIFFIN_LIM_ITERS,
            seed: 0,
        }
    }
}

/// A trained codec: analysis settings, quantizer, and synthesis state.
#[derive(Debug, Clone)]
pub struct SpectralCodec<F: Real> {
    stft: StftConfig,
    n_mels: usize,
    sample_rate: u32,
    quantizer: GrvqQuantizer<F>,
    /// bins x n_mels; recomputed from the header on load, never serialized.
    pseudo_inverse: Vec<Vec<F>>,
    griffin_lim_iters: usize,
}

/// Fixed-size description of an encoded stream; everything needed to
/// check codec compatibility and size the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub sample_rate: u32,
    pub hop: u32,
    pub window: u32,
    pub n_mels: u16,
    pub codebook_size: u32,
    pub n_levels: u16,
    pub n_levels_used: u16,
    pub n_groups: u16,
    pub n_frames: u32,
}

/// Quantized representation of one signal.
#[derive(Debug, Clone)]
pub struct EncodedStream {
    pub header: StreamHeader,
    pub codes: CodeSequence,
    /// Set when the requested bitrate fell outside what the level count
    /// can express and was clamped.
    pub bitrate_clamped: bool,
}

impl EncodedStream {
    pub fn new(header: StreamHeader, codes: CodeSequence, bitrate_clamped: bool) -> Result<Self> {
        if codes.n_frames() != header.n_frames as usize
            || codes.n_groups() != header.n_groups as usize
            || codes.n_levels_used() != header.n_levels_used as usize
            || codes.codebook_size() != header.codebook_size as usize
        {
            return Err(Error::HeaderMismatch(
                "code dimensions disagree with the header".into(),
            ));
        }
        Ok(EncodedStream {
            header,
            codes,
            bitrate_clamped,
        })
    }

    /// Payload bitrate implied by the header: frame_rate * levels * G * log2(B).
    pub fn achieved_bitrate(&self) -> f64 {
        let frame_rate = self.header.sample_rate as f64 / self.header.hop as f64;
        frame_rate
            * self.header.n_levels_used as f64
            * self.header.n_groups as f64
            * (self.header.codebook_size as f64).log2()
    }
}

/// Round every codebook entry through f32 so the trained model and its
/// serialized form quantize identically.
fn canonicalize_quantizer<F: Real>(q: &GrvqQuantizer<F>) -> Result<GrvqQuantizer<F>> {
    let mut groups = Vec::with_capacity(q.n_groups());
    for g in 0..q.n_groups() {
        let group = q.group(g);
        let mut books = Vec::with_capacity(group.n_levels());
        for l in 0..group.n_levels() {
            let rows: Vec<Vec<F>> = group
                .codebook(l)
                .rows()
                .map(|r| {
                    r.iter()
                        .map(|&v| F::from_f64_lossy(v.to_f64_lossy() as f32 as f64))
                        .collect()
                })
                .collect();
            books.push(Codebook::from_rows(rows)?);
        }
        groups.push(RvqQuantizer::from_codebooks(books)?);
    }
    GrvqQuantizer::from_groups(groups)
}

/// Regularized right-inverse of the mel filterbank:
/// `Fᵀ (F Fᵀ + λI)⁻¹`, shape bins x n_mels.
fn mel_pseudo_inverse<F: Real>(
    stft: StftConfig,
    n_mels: usize,
    sample_rate: u32,
) -> Result<Vec<Vec<F>>> {
    let bins = stft.n_bins();
    let nyquist = F::from_f64_lossy(sample_rate as f64 / 2.0);
    let fb = mel_filterbank::<F>(bins, n_mels, sample_rate, F::zero(), nyquist)?;
    let ridge = F::from_f64_lossy(MEL_PINV_RIDGE);
    let mut gram = vec![vec![F::zero(); n_mels]; n_mels];
    for i in 0..n_mels {
        for j in 0..=i {
            let mut dot = F::zero();
            for k in 0..bins {
                dot += fb[i][k] * fb[j][k];
            }
            gram[i][j] = dot;
            gram[j][i] = dot;
        }
        gram[i][i] += ridge;
    }
    let mut pinv = vec![vec![F::zero(); n_mels]; bins];
    for k in 0..bins {
        let col: Vec<F> = (0..n_mels).map(|m| fb[m][k]).collect();
        let x = solve_spd(gram.clone(), &col)?;
        pinv[k].copy_from_slice(&x);
    }
    Ok(pinv)
}

impl<F: Real> SpectralCodec<F> {
    /// Assemble a codec from a trained quantizer, recomputing synthesis
    /// state from the analysis settings.
    pub fn from_parts(
        stft: StftConfig,
        n_mels: usize,
        sample_rate: u32,
        quantizer: GrvqQuantizer<F>,
        griffin_lim_iters: usize,
    ) -> Result<Self> {
        if quantizer.dim() != n_mels {
            return Err(Error::DimensionMismatch {
                expected: n_mels,
                got: quantizer.dim(),
            });
        }
        if griffin_lim_iters == 0 {
            return Err(Error::InvalidArgument(
                "griffin_lim_iters must be >= 1".into(),
            ));
        }
        if !stft.is_cola() {
            return Err(Error::NonCola {
                window: stft.window_size,
                hop: stft.hop,
            });
        }
        let pseudo_inverse = mel_pseudo_inverse(stft, n_mels, sample_rate)?;
        Ok(SpectralCodec {
            stft,
            n_mels,
            sample_rate,
            quantizer,
            pseudo_inverse,
            griffin_lim_iters,
        })
    }

    pub fn analysis(&self) -> StftConfig {
        self.stft
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn quantizer(&self) -> &GrvqQuantizer<F> {
        &self.quantizer
    }

    pub fn griffin_lim_iters(&self) -> usize {
        self.griffin_lim_iters
    }

    pub fn n_levels(&self) -> usize {
        self.quantizer.n_levels()
    }

    pub fn codebook_size(&self) -> usize {
        self.quantizer.codebook_size()
    }

    pub fn n_groups(&self) -> usize {
        self.quantizer.n_groups()
    }

    /// Quantized frames per second.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.stft.hop as f64
    }

    /// Log-mel frames, exactly `ceil(len / hop)` of them.
    pub fn analysis_frames(&self, audio: &AudioBuffer<F>) -> Result<Vec<Vec<F>>> {
        if audio.sample_rate() != self.sample_rate {
            return Err(Error::SampleRateMismatch(
                self.sample_rate,
                audio.sample_rate(),
            ));
        }
        let mel = mel_spectrogram(audio, self.stft, self.n_mels, true)?;
        let n = audio.len().div_ceil(self.stft.hop);
        let mut frames = mel.frames;
        frames.truncate(n);
        Ok(frames)
    }

    fn header(&self, n_frames: usize, n_levels_used: usize) -> StreamHeader {
        StreamHeader {
            sample_rate: self.sample_rate,
            hop: self.stft.hop as u32,
            window: self.stft.window_size as u32,
            n_mels: self.n_mels as u16,
            codebook_size: self.codebook_size() as u32,
            n_levels: self.n_levels() as u16,
            n_levels_used: n_levels_used as u16,
            n_groups: self.n_groups() as u16,
            n_frames: n_frames as u32,
        }
    }

    /// Encode with an explicit level count (1..=L).
    pub fn encode_with_levels(
        &self,
        audio: &AudioBuffer<F>,
        n_levels: usize,
    ) -> Result<EncodedStream> {
        if n_levels == 0 || n_levels > self.n_levels() {
            return Err(Error::InvalidArgument(format!(
                "n_levels {n_levels} out of range 1..={}",
                self.n_levels()
            )));
        }
        let frames = self.analysis_frames(audio)?;
        let (codes, _) = grvq_encode(&self.quantizer, &frames, n_levels)?;
        let codes = codes.with_frame_rate(self.frame_rate());
        EncodedStream::new(self.header(frames.len(), n_levels), codes, false)
    }

    /// Encode at the level count nearest the target bitrate. Targets
    /// outside the quantizer's range are clamped and flagged.
    pub fn encode(&self, audio: &AudioBuffer<F>, bitrate_bps: f64) -> Result<EncodedStream> {
        if bitrate_bps <= 0.0 {
            return Err(Error::InvalidArgument(
                "bitrate must be positive".into(),
            ));
        }
        let bits_per_code = (self.codebook_size() as f64).log2();
        let per_level = bits_per_code * self.frame_rate() * self.n_groups() as f64;
        let raw = (bitrate_bps / per_level).round();
        let clamped = raw < 1.0 || raw > self.n_levels() as f64;
        let n_levels = levels_for_bitrate(
            bitrate_bps / self.n_groups() as f64,
            self.codebook_size(),
            self.frame_rate(),
            self.n_levels(),
        );
        let mut stream = self.encode_with_levels(audio, n_levels)?;
        stream.bitrate_clamped = clamped;
        Ok(stream)
    }

    /// Decode a stream produced by this codec (or a compatible one) back
    /// to a waveform of exactly `n_frames * hop` samples.
    pub fn decode(&self, stream: &EncodedStream) -> Result<AudioBuffer<F>> {
        let expected = self.header(
            stream.header.n_frames as usize,
            stream.header.n_levels_used as usize,
        );
        if stream.header != expected {
            return Err(Error::HeaderMismatch(format!(
                "stream {:?} vs codec {:?}",
                stream.header, expected
            )));
        }
        let e_hat = grvq_decode(&self.quantizer, &stream.codes)?;
        let bins = self.stft.n_bins();
        let magnitudes: Vec<Vec<F>> = e_hat
            .iter()
            .map(|frame| {
                let mel_power: Vec<F> = frame.iter().map(|&v| v.exp()).collect();
                (0..bins)
                    .map(|k| {
                        let mut acc = F::zero();
                        for (m, &p) in mel_power.iter().enumerate() {
                            acc += self.pseudo_inverse[k][m] * p;
                        }
                        acc.max(F::zero())
                    })
                    .collect()
            })
            .collect();
        let out_len = stream.header.n_frames as usize * self.stft.hop;
        let (audio, _) = griffin_lim_with_len(
            &magnitudes,
            self.stft,
            self.sample_rate,
            self.griffin_lim_iters,
            out_len,
        )?;
        Ok(audio)
    }
}

/// Train the full codec on a corpus; deterministic given the seed.
pub fn train_codec<F: Real>(
    corpus: &[AudioBuffer<F>],
    config: &CodecConfig,
) -> Result<SpectralCodec<F>> {
    if corpus.is_empty() {
        return Err(Error::InsufficientData {
            need: config.codebook_size,
            got: 0,
        });
    }
    let sample_rate = corpus[0].sample_rate();
    for b in corpus {
        if b.sample_rate() != sample_rate {
            return Err(Error::SampleRateMismatch(sample_rate, b.sample_rate()));
        }
    }
    if config.n_groups == 0 || config.n_mels % config.n_groups != 0 {
        return Err(Error::InvalidArgument(format!(
            "n_mels {} not divisible by {} groups",
            config.n_mels, config.n_groups
        )));
    }
    let stft = StftConfig::new(config.window, config.hop)?;
    // a probe codec carries the analysis settings before training
    let probe = SpectralCodecAnalysis {
        stft,
        n_mels: config.n_mels,
        sample_rate,
    };
    let mut frames = Vec::new();
    for b in corpus {
        frames.extend(probe.frames(b)?);
    }
    if frames.len() < config.codebook_size {
        return Err(Error::InsufficientData {
            need: config.codebook_size,
            got: frames.len(),
        });
    }
    let train = TrainConfig {
        n_levels: config.n_levels,
        codebook_size: config.codebook_size,
        epochs: config.epochs.max(1),
        seed: config.seed,
    };
    let quantizer = train_grvq(&frames, config.n_groups, &train)?;
    let quantizer = canonicalize_quantizer(&quantizer)?;
    SpectralCodec::from_parts(
        stft,
        config.n_mels,
        sample_rate,
        quantizer,
        config.griffin_lim_iters,
    )
}

/// Analysis-only view used while the quantizer does not exist yet.
struct SpectralCodecAnalysis {
    stft: StftConfig,
    n_mels: usize,
    sample_rate: u32,
}

impl SpectralCodecAnalysis {
    fn frames<F: Real>(&self, audio: &AudioBuffer<F>) -> Result<Vec<Vec<F>>> {
        if audio.sample_rate() != self.sample_rate {
            return Err(Error::SampleRateMismatch(
                self.sample_rate,
                audio.sample_rate(),
            ));
        }
        let mel = mel_spectrogram(audio, self.stft, self.n_mels, true)?;
        let n = audio.len().div_ceil(self.stft.hop);
        let mut frames = mel.frames;
        frames.truncate(n);
        Ok(frames)
    }
}

/// One row of a training report: losses and residual energies when the
/// cascade is cut at `n_levels`.
#[derive(Debug, Clone)]
pub struct LevelReportRow<F: Real> {
    pub n_levels: usize,
    /// Commitment loss over the held-out frames, averaged across groups.
    pub commitment: F,
    /// Multi-scale log-mel loss of the decoded roundtrip, averaged across
    /// held-out signals; absent when signals are too short to analyze.
    pub mel_loss: Option<F>,
    /// Mean squared residual norm after each level, summed across groups.
    pub residual_energy: Vec<F>,
}

/// Development-set monitoring: cut the cascade at each requested level
/// count and measure losses on held-out audio.
pub fn training_report<F: Real>(
    codec: &SpectralCodec<F>,
    heldout: &[AudioBuffer<F>],
    level_counts: &[usize],
    with_roundtrip: bool,
) -> Result<Vec<LevelReportRow<F>>> {
    if heldout.is_empty() {
        return Err(Error::InsufficientData { need: 1, got: 0 });
    }
    let mut frames = Vec::new();
    for b in heldout {
        frames.extend(codec.analysis_frames(b)?);
    }
    let group_dim = codec.n_mels / codec.n_groups();
    let group_frames: Vec<Vec<Vec<F>>> = (0..codec.n_groups())
        .map(|g| {
            frames
                .iter()
                .map(|f| f[g * group_dim..(g + 1) * group_dim].to_vec())
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(level_counts.len());
    for &n in level_counts {
        if n == 0 || n > codec.n_levels() {
            return Err(Error::InvalidArgument(format!(
                "level count {n} out of range 1..={}",
                codec.n_levels()
            )));
        }
        let mut commitment = F::zero();
        let mut residual_energy = vec![F::zero(); n];
        for (g, gf) in group_frames.iter().enumerate() {
            let q = codec.quantizer.group(g);
            commitment += commitment_loss(gf, q, n, NormKind::L2)?;
            let out = rvq_encode_full(q, gf, n)?;
            for (l, level_residuals) in out.residuals.iter().enumerate() {
                let total: F = level_residuals
                    .iter()
                    .flat_map(|r| r.iter().map(|&v| v * v))
                    .sum();
                residual_energy[l] += total / F::from_usize_lossy(level_residuals.len().max(1));
            }
        }
        commitment /= F::from_usize_lossy(codec.n_groups());

        let mel_loss = if with_roundtrip {
            roundtrip_mel_loss(codec, heldout, n)?
        } else {
            None
        };
        rows.push(LevelReportRow {
            n_levels: n,
            commitment,
            mel_loss,
            residual_energy,
        });
    }
    Ok(rows)
}

fn roundtrip_mel_loss<F: Real>(
    codec: &SpectralCodec<F>,
    heldout: &[AudioBuffer<F>],
    n_levels: usize,
) -> Result<Option<F>> {
    use crate::losses::{multi_scale_mel_loss, ScaleSet};
    let scales = ScaleSet::default();
    let max_window = *scales.windows().iter().max().unwrap();
    let mut total = F::zero();
    let mut count = 0usize;
    for b in heldout {
        if b.len() < max_window {
            continue;
        }
        let stream = codec.encode_with_levels(b, n_levels)?;
        let decoded = codec.decode(&stream)?;
        // decode pads to a whole frame count; compare over the original span
        let trimmed =
            AudioBuffer::new(decoded.samples()[..b.len()].to_vec(), b.sample_rate())?;
        total += multi_scale_mel_loss(b, &trimmed, &scales, NormKind::L1)?;
        count += 1;
    }
    if count == 0 {
        return Ok(None);
    }
    Ok(Some(total / F::from_usize_lossy(count)))
}
