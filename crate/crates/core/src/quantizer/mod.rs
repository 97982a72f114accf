//! Vector quantization: plain VQ, residual VQ, and group-RVQ with k-means
//! initialization and exponential-moving-average codebook learning.

mod bitrate;
mod kmeans;
mod rvq;

pub use bitrate::{levels_for_bitrate, sample_bitrate};
pub use kmeans::kmeans_init;
pub use rvq::{
    grvq_encode, grvq_decode, rvq_encode, rvq_encode_full, rvq_decode, train_grvq, train_rvq,
    CodeSequence, GrvqQuantizer, RvqEncodeOutput, RvqQuantizer, TrainConfig,
};

use crate::error::{Error, Result};
use crate::real::Real;

/// A set of code vectors, row-major `n_codes x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<F: Real> {
    data: Vec<F>,
    n_codes: usize,
    dim: usize,
}

impl<F: Real> Codebook<F> {
    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        let n_codes = rows.len();
        if n_codes == 0 {
            return Err(Error::InvalidArgument("codebook must be non-empty".into()));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("code dimension must be >= 1".into()));
        }
        let mut data = Vec::with_capacity(n_codes * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite code entry".into()));
            }
            data.extend_from_slice(&row);
        }
        Ok(Self { data, n_codes, dim })
    }

    pub fn n_codes(&self) -> usize {
        self.n_codes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn code(&self, i: usize) -> &[F] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn code_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Index of the code minimizing squared Euclidean distance; ties break to
/// the lowest index.
pub fn vq_encode<F: Real>(codebook: &Codebook<F>, vector: &[F]) -> Result<usize> {
    if vector.len() != codebook.dim {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim,
            got: vector.len(),
        });
    }
    let mut best = 0usize;
    let mut best_dist = F::infinity();
    for (i, code) in codebook.rows().enumerate() {
        let mut dist = F::zero();
        for (a, b) in code.iter().zip(vector) {
            let d = *a - *b;
            dist += d * d;
        }
        if dist < best_dist {
            best_dist = dist;
            best = i;
        }
    }
    Ok(best)
}

/// Look up a code row.
pub fn vq_decode<F: Real>(codebook: &Codebook<F>, index: usize) -> Result<Vec<F>> {
    if index >= codebook.n_codes {
        return Err(Error::IndexOutOfRange {
            index,
            size: codebook.n_codes,
        });
    }
    Ok(codebook.code(index).to_vec())
}

/// EMA learning state for one codebook.
#[derive(Debug, Clone)]
pub struct EmaState<F: Real> {
    pub cluster_size: Vec<F>,
    /// Flat `n_codes x dim`, EMA of assigned-vector sums.
    pub embed_sum: Vec<F>,
    pub decay: F,
    pub epsilon: F,
}

/// Default EMA decay.
pub const EMA_DECAY: f64 = 0.99;
/// Default Laplace-smoothing constant.
pub const EMA_EPSILON: f64 = 1e-5;
/// Codes whose EMA cluster size drops below this are re-seeded in training.
pub const DEAD_CODE_THRESHOLD: f64 = 1.0;

impl<F: Real> EmaState<F> {
    pub fn new(n_codes: usize, dim: usize) -> Self {
        Self {
            cluster_size: vec![F::zero(); n_codes],
            embed_sum: vec![F::zero(); n_codes * dim],
            decay: F::from_f64_lossy(EMA_DECAY),
            epsilon: F::from_f64_lossy(EMA_EPSILON),
        }
    }

    /// Seed the running statistics from an initial codebook and counts so
    /// the first EMA step does not collapse toward zero.
    pub fn seed_from(codebook: &Codebook<F>, counts: &[usize]) -> Self {
        let mut state = Self::new(codebook.n_codes(), codebook.dim());
        for (i, &c) in counts.iter().enumerate() {
            let c = F::from_usize_lossy(c.max(1));
            state.cluster_size[i] = c;
            for (d, &v) in codebook.code(i).iter().enumerate() {
                state.embed_sum[i * codebook.dim() + d] = v * c;
            }
        }
        state
    }

    /// Laplace-smoothed cluster sizes over the total EMA mass.
    pub fn smoothed_sizes(&self) -> Vec<F> {
        let n_codes = self.cluster_size.len();
        let total: F = self.cluster_size.iter().copied().sum();
        if total <= F::zero() {
            return self.cluster_size.clone();
        }
        let denom = total + F::from_usize_lossy(n_codes) * self.epsilon;
        self.cluster_size
            .iter()
            .map(|&s| (s + self.epsilon) / denom * total)
            .collect()
    }
}

/// One EMA step: decay the running statistics toward the batch statistics
/// and rewrite every code as its smoothed mean.
pub fn ema_update<F: Real>(
    codebook: &mut Codebook<F>,
    state: &mut EmaState<F>,
    batch: &[Vec<F>],
    assignments: &[usize],
) -> Result<()> {
    let dim = codebook.dim;
    let n_codes = codebook.n_codes;
    if batch.len() != assignments.len() {
        return Err(Error::LengthMismatch(batch.len(), assignments.len()));
    }
    let mut counts = vec![F::zero(); n_codes];
    let mut sums = vec![F::zero(); n_codes * dim];
    for (vec, &a) in batch.iter().zip(assignments) {
        if a >= n_codes {
            return Err(Error::IndexOutOfRange {
                index: a,
                size: n_codes,
            });
        }
        if vec.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: vec.len(),
            });
        }
        counts[a] += F::one();
        for (d, &v) in vec.iter().enumerate() {
            sums[a * dim + d] += v;
        }
    }

    let g = state.decay;
    let one_minus_g = F::one() - g;
    for i in 0..n_codes {
        state.cluster_size[i] = g * state.cluster_size[i] + one_minus_g * counts[i];
    }
    for (s, b) in state.embed_sum.iter_mut().zip(&sums) {
        *s = g * *s + one_minus_g * *b;
    }

    let smoothed = state.smoothed_sizes();
    let total: F = state.cluster_size.iter().copied().sum();
    if total > F::zero() {
        for i in 0..n_codes {
            if smoothed[i] > F::zero() {
                for d in 0..dim {
                    codebook.data[i * dim + d] = state.embed_sum[i * dim + d] / smoothed[i];
                }
            }
        }
    }
    Ok(())
}
