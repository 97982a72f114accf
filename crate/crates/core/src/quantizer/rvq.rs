//! Residual vector quantization and its grouped variant, with
//! level-sequential EMA training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::real::Real;

use super::kmeans::kmeans_with_counts;
use super::{ema_update, vq_encode, Codebook, EmaState, DEAD_CODE_THRESHOLD};

/// Per-frame multi-level code indices plus framing metadata.
///
/// Layout is frame-major, then group, then level:
/// `codes[(t * n_groups + g) * n_levels_used + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSequence {
    codes: Vec<u32>,
    n_frames: usize,
    n_groups: usize,
    n_levels_used: usize,
    codebook_size: usize,
    frame_rate: f64,
}

impl CodeSequence {
    pub fn new(
        codes: Vec<u32>,
        n_frames: usize,
        n_groups: usize,
        n_levels_used: usize,
        codebook_size: usize,
        frame_rate: f64,
    ) -> Result<Self> {
        if n_levels_used == 0 || n_groups == 0 {
            return Err(Error::InvalidArgument(
                "code sequence needs at least one level and one group".into(),
            ));
        }
        if codes.len() != n_frames * n_groups * n_levels_used {
            return Err(Error::LengthMismatch(
                codes.len(),
                n_frames * n_groups * n_levels_used,
            ));
        }
        if codes.iter().any(|&c| c as usize >= codebook_size) {
            return Err(Error::CorruptCodes(format!(
                "index out of range for codebook size {codebook_size}"
            )));
        }
        Ok(Self {
            codes,
            n_frames,
            n_groups,
            n_levels_used,
            codebook_size,
            frame_rate,
        })
    }

    pub fn code(&self, frame: usize, group: usize, level: usize) -> u32 {
        self.codes[(frame * self.n_groups + group) * self.n_levels_used + level]
    }

    pub fn raw(&self) -> &[u32] {
        &self.codes
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn n_levels_used(&self) -> usize {
        self.n_levels_used
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn with_frame_rate(mut self, frame_rate: f64) -> Self {
        self.frame_rate = frame_rate;
        self
    }
}

/// Cascade of codebooks over a shared dimension; level `i` quantizes the
/// residual left by levels `1..i`.
#[derive(Debug, Clone)]
pub struct RvqQuantizer<F: Real> {
    levels: Vec<(Codebook<F>, EmaState<F>)>,
    dim: usize,
}

impl<F: Real> RvqQuantizer<F> {
    pub fn from_codebooks(codebooks: Vec<Codebook<F>>) -> Result<Self> {
        if codebooks.is_empty() {
            return Err(Error::InvalidArgument("need at least one level".into()));
        }
        let dim = codebooks[0].dim();
        for cb in &codebooks {
            if cb.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: cb.dim(),
                });
            }
        }
        let levels = codebooks
            .into_iter()
            .map(|cb| {
                let state = EmaState::new(cb.n_codes(), cb.dim());
                (cb, state)
            })
            .collect();
        Ok(Self { levels, dim })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codebook(&self, level: usize) -> &Codebook<F> {
        &self.levels[level].0
    }

    pub fn codebook_size(&self) -> usize {
        self.levels[0].0.n_codes()
    }
}

/// Full encode output: codes, reconstruction, and the residual left after
/// each level (`residuals[i]` is `Q_{i+1}` in the cascade).
pub struct RvqEncodeOutput<F: Real> {
    pub codes: CodeSequence,
    pub reconstruction: Vec<Vec<F>>,
    pub residuals: Vec<Vec<Vec<F>>>,
}

/// Encode frames through the first `n_levels` levels of the cascade.
pub fn rvq_encode<F: Real>(
    q: &RvqQuantizer<F>,
    frames: &[Vec<F>],
    n_levels: usize,
) -> Result<(CodeSequence, Vec<Vec<F>>)> {
    let out = rvq_encode_full(q, frames, n_levels)?;
    Ok((out.codes, out.reconstruction))
}

/// As [`rvq_encode`] but keeping per-level residuals (used by the
/// commitment loss and training reports).
pub fn rvq_encode_full<F: Real>(
    q: &RvqQuantizer<F>,
    frames: &[Vec<F>],
    n_levels: usize,
) -> Result<RvqEncodeOutput<F>> {
    if n_levels == 0 || n_levels > q.n_levels() {
        return Err(Error::InvalidArgument(format!(
            "n_levels {n_levels} out of range 1..={}",
            q.n_levels()
        )));
    }
    let t = frames.len();
    let mut codes = vec![0u32; t * n_levels];
    let mut recon = vec![vec![F::zero(); q.dim]; t];
    let mut residual: Vec<Vec<F>> = frames.to_vec();
    let mut residuals = Vec::with_capacity(n_levels);

    for level in 0..n_levels {
        let cb = &q.levels[level].0;
        for (i, r) in residual.iter_mut().enumerate() {
            let idx = vq_encode(cb, r)?;
            codes[i * n_levels + level] = idx as u32;
            let code = cb.code(idx);
            for d in 0..q.dim {
                recon[i][d] += code[d];
                r[d] = r[d] - code[d];
            }
        }
        residuals.push(residual.clone());
    }

    let codes = CodeSequence::new(codes, t, 1, n_levels, q.codebook_size(), 0.0)?;
    Ok(RvqEncodeOutput {
        codes,
        reconstruction: recon,
        residuals,
    })
}

/// Sum the per-level code vectors of each frame.
pub fn rvq_decode<F: Real>(q: &RvqQuantizer<F>, codes: &CodeSequence) -> Result<Vec<Vec<F>>> {
    if codes.n_groups != 1 {
        return Err(Error::InvalidArgument(
            "grouped code sequence requires grvq_decode".into(),
        ));
    }
    if codes.n_levels_used > q.n_levels() {
        return Err(Error::InvalidArgument(format!(
            "codes use {} levels but quantizer has {}",
            codes.n_levels_used,
            q.n_levels()
        )));
    }
    let mut out = vec![vec![F::zero(); q.dim]; codes.n_frames];
    for t in 0..codes.n_frames {
        for level in 0..codes.n_levels_used {
            let idx = codes.code(t, 0, level) as usize;
            let cb = &q.levels[level].0;
            if idx >= cb.n_codes() {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    size: cb.n_codes(),
                });
            }
            let code = cb.code(idx);
            for d in 0..q.dim {
                out[t][d] += code[d];
            }
        }
    }
    Ok(out)
}

/// Group-RVQ: independent RVQ cascades over contiguous dimension slices.
#[derive(Debug, Clone)]
pub struct GrvqQuantizer<F: Real> {
    groups: Vec<RvqQuantizer<F>>,
}

impl<F: Real> GrvqQuantizer<F> {
    pub fn from_groups(groups: Vec<RvqQuantizer<F>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidArgument("need at least one group".into()));
        }
        let levels = groups[0].n_levels();
        let dim = groups[0].dim();
        for g in &groups {
            if g.n_levels() != levels || g.dim() != dim {
                return Err(Error::InvalidArgument(
                    "all groups must share level count and dimension".into(),
                ));
            }
        }
        Ok(Self { groups })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, g: usize) -> &RvqQuantizer<F> {
        &self.groups[g]
    }

    pub fn n_levels(&self) -> usize {
        self.groups[0].n_levels()
    }

    /// Total (concatenated) frame dimension.
    pub fn dim(&self) -> usize {
        self.groups[0].dim() * self.groups.len()
    }

    pub fn codebook_size(&self) -> usize {
        self.groups[0].codebook_size()
    }
}

/// Split each frame into contiguous slices and RVQ-encode them independently.
pub fn grvq_encode<F: Real>(
    q: &GrvqQuantizer<F>,
    frames: &[Vec<F>],
    n_levels: usize,
) -> Result<(CodeSequence, Vec<Vec<F>>)> {
    let g = q.n_groups();
    let total_dim = q.dim();
    let group_dim = q.groups[0].dim();
    for f in frames {
        if f.len() != total_dim {
            return Err(Error::DimensionMismatch {
                expected: total_dim,
                got: f.len(),
            });
        }
    }
    let t = frames.len();
    let mut codes = vec![0u32; t * g * n_levels];
    let mut recon = vec![vec![F::zero(); total_dim]; t];

    for (gi, group) in q.groups.iter().enumerate() {
        let slice: Vec<Vec<F>> = frames
            .iter()
            .map(|f| f[gi * group_dim..(gi + 1) * group_dim].to_vec())
            .collect();
        let (group_codes, group_recon) = rvq_encode(group, &slice, n_levels)?;
        for ti in 0..t {
            for level in 0..n_levels {
                codes[(ti * g + gi) * n_levels + level] = group_codes.code(ti, 0, level);
            }
            recon[ti][gi * group_dim..(gi + 1) * group_dim].copy_from_slice(&group_recon[ti]);
        }
    }

    let codes = CodeSequence::new(codes, t, g, n_levels, q.codebook_size(), 0.0)?;
    Ok((codes, recon))
}

/// Decode a grouped code sequence back to concatenated frames.
pub fn grvq_decode<F: Real>(q: &GrvqQuantizer<F>, codes: &CodeSequence) -> Result<Vec<Vec<F>>> {
    if codes.n_groups != q.n_groups() {
        return Err(Error::InvalidArgument(format!(
            "codes have {} groups, quantizer has {}",
            codes.n_groups,
            q.n_groups()
        )));
    }
    let group_dim = q.groups[0].dim();
    let mut out = vec![vec![F::zero(); q.dim()]; codes.n_frames];
    for (gi, group) in q.groups.iter().enumerate() {
        for t in 0..codes.n_frames {
            for level in 0..codes.n_levels_used {
                let idx = codes.code(t, gi, level) as usize;
                let cb = group.codebook(level);
                if idx >= cb.n_codes() {
                    return Err(Error::IndexOutOfRange {
                        index: idx,
                        size: cb.n_codes(),
                    });
                }
                let code = cb.code(idx);
                for d in 0..group_dim {
                    out[t][gi * group_dim + d] += code[d];
                }
            }
        }
    }
    Ok(out)
}

/// Training parameters for [`train_rvq`] / [`train_grvq`].
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub n_levels: usize,
    pub codebook_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

fn level_seed(seed: u64, level: usize) -> u64 {
    seed.wrapping_add((level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Level-sequential training: k-means init on the current residuals, then
/// full-batch EMA passes; dead codes are re-seeded from random residuals.
pub fn train_rvq<F: Real>(frames: &[Vec<F>], config: &TrainConfig) -> Result<RvqQuantizer<F>> {
    if config.n_levels == 0 || config.codebook_size == 0 {
        return Err(Error::InvalidArgument(
            "levels and codebook size must be >= 1".into(),
        ));
    }
    if frames.len() < config.codebook_size {
        return Err(Error::InsufficientData {
            need: config.codebook_size,
            got: frames.len(),
        });
    }
    let dim = frames[0].len();
    let dead = F::from_f64_lossy(DEAD_CODE_THRESHOLD);
    let mut residual: Vec<Vec<F>> = frames.to_vec();
    let mut levels = Vec::with_capacity(config.n_levels);

    for level in 0..config.n_levels {
        let seed = level_seed(config.seed, level);
        let (mut codebook, counts, _) =
            kmeans_with_counts(&residual, config.codebook_size, seed)?;
        let mut state = EmaState::seed_from(&codebook, &counts);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);

        for _ in 0..config.epochs {
            let assignments: Vec<usize> = residual
                .iter()
                .map(|r| vq_encode(&codebook, r))
                .collect::<Result<_>>()?;
            ema_update(&mut codebook, &mut state, &residual, &assignments)?;

            for i in 0..config.codebook_size {
                if state.cluster_size[i] < dead {
                    let pick = rng.gen_range(0..residual.len());
                    let fresh = residual[pick].clone();
                    codebook.code_mut(i).copy_from_slice(&fresh);
                    state.cluster_size[i] = F::one();
                    for (d, &v) in fresh.iter().enumerate() {
                        state.embed_sum[i * dim + d] = v;
                    }
                }
            }
        }

        // peel this level off the residuals before training the next
        for r in &mut residual {
            let idx = vq_encode(&codebook, r)?;
            let code = codebook.code(idx);
            for d in 0..dim {
                r[d] = r[d] - code[d];
            }
        }
        levels.push((codebook, state));
    }

    Ok(RvqQuantizer { levels, dim })
}

/// Train one independent RVQ per contiguous dimension slice.
pub fn train_grvq<F: Real>(
    frames: &[Vec<F>],
    n_groups: usize,
    config: &TrainConfig,
) -> Result<GrvqQuantizer<F>> {
    if frames.is_empty() {
        return Err(Error::InsufficientData {
            need: config.codebook_size,
            got: 0,
        });
    }
    let dim = frames[0].len();
    if n_groups == 0 || dim % n_groups != 0 {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} not divisible by {n_groups} groups"
        )));
    }
    let group_dim = dim / n_groups;
    let mut groups = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        let slice: Vec<Vec<F>> = frames
            .iter()
            .map(|f| f[g * group_dim..(g + 1) * group_dim].to_vec())
            .collect();
        let group_config = TrainConfig {
            seed: config.seed.wrapping_add(g as u64).wrapping_mul(0x0100_0000_01B3),
            ..*config
        };
        groups.push(train_rvq(&slice, &group_config)?);
    }
    GrvqQuantizer::from_groups(groups)
}
