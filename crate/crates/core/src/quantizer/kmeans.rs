//! Deterministic k-means (k-means++ seeding, Lloyd refinement) used to
//! initialize each quantizer level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::real::Real;

use super::Codebook;

const MAX_LLOYD_ITERS: usize = 50;
const REL_INERTIA_TOL: f64 = 1e-4;

fn dist_sq<F: Real>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        acc += d * d;
    }
    acc
}

/// k-means++ seeding followed by at most 50 Lloyd iterations (stopping when
/// the relative inertia change drops below 1e-4). Deterministic given seed.
pub fn kmeans_init<F: Real>(frames: &[Vec<F>], n_codes: usize, seed: u64) -> Result<Codebook<F>> {
    Ok(kmeans_with_counts(frames, n_codes, seed)?.0)
}

/// As [`kmeans_init`], also returning final assignment counts and inertia.
pub fn kmeans_with_counts<F: Real>(
    frames: &[Vec<F>],
    n_codes: usize,
    seed: u64,
) -> Result<(Codebook<F>, Vec<usize>, F)> {
    let n = frames.len();
    if n < n_codes {
        return Err(Error::InsufficientData {
            need: n_codes,
            got: n,
        });
    }
    if n_codes == 0 {
        return Err(Error::InvalidArgument("n_codes must be >= 1".into()));
    }
    let dim = frames[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centers: Vec<Vec<F>> = Vec::with_capacity(n_codes);
    let first = rng.gen_range(0..n);
    centers.push(frames[first].clone());
    let mut min_d: Vec<F> = frames.iter().map(|f| dist_sq(f, &centers[0])).collect();
    while centers.len() < n_codes {
        let total: F = min_d.iter().copied().sum();
        let pick = if total > F::zero() {
            let mut target = F::from_f64_lossy(rng.gen::<f64>()) * total;
            let mut chosen = n - 1;
            for (i, &d) in min_d.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // all remaining distances are zero (duplicate-heavy data):
            // fall back to a uniform draw
            rng.gen_range(0..n)
        };
        centers.push(frames[pick].clone());
        let c = centers.last().unwrap();
        for (i, f) in frames.iter().enumerate() {
            let d = dist_sq(f, c);
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }

    // Lloyd refinement
    let mut assignments = vec![0usize; n];
    let mut prev_inertia = F::infinity();
    let mut counts = vec![0usize; n_codes];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut inertia = F::zero();
        for (i, f) in frames.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = F::infinity();
            for (c, center) in centers.iter().enumerate() {
                let d = dist_sq(f, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assignments[i] = best;
            inertia += best_d;
        }

        let mut sums = vec![vec![F::zero(); dim]; n_codes];
        counts = vec![0usize; n_codes];
        for (f, &a) in frames.iter().zip(&assignments) {
            counts[a] += 1;
            for (d, &v) in f.iter().enumerate() {
                sums[a][d] += v;
            }
        }
        for c in 0..n_codes {
            if counts[c] > 0 {
                let inv = F::one() / F::from_usize_lossy(counts[c]);
                for d in 0..dim {
                    centers[c][d] = sums[c][d] * inv;
                }
            }
        }

        if prev_inertia.is_finite() {
            let change = (prev_inertia - inertia).abs();
            if inertia == F::zero() || change <= prev_inertia * F::from_f64_lossy(REL_INERTIA_TOL)
            {
                prev_inertia = inertia;
                break;
            }
        }
        prev_inertia = inertia;
    }

    let inertia = if prev_inertia.is_finite() {
        prev_inertia
    } else {
        F::zero()
    };
    Ok((Codebook::from_rows(centers)?, counts, inertia))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn separated_clusters_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut frames: Vec<Vec<f64>> = Vec::new();
        for _ in 0..200 {
            frames.push(vec![
                1.0 + rng.gen_range(-0.01..0.01),
                1.0 + rng.gen_range(-0.01..0.01),
            ]);
            frames.push(vec![
                -1.0 + rng.gen_range(-0.01..0.01),
                -1.0 + rng.gen_range(-0.01..0.01),
            ]);
        }
        let cb = kmeans_init(&frames, 2, 0).unwrap();
        let mut found_pos = false;
        let mut found_neg = false;
        for row in cb.rows() {
            if (row[0] - 1.0).abs() < 0.05 && (row[1] - 1.0).abs() < 0.05 {
                found_pos = true;
            }
            if (row[0] + 1.0).abs() < 0.05 && (row[1] + 1.0).abs() < 0.05 {
                found_neg = true;
            }
        }
        assert!(found_pos && found_neg);
    }

    #[test]
    fn saturated_codebook_hits_zero_inertia() {
        let frames = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]];
        let (cb, _, inertia) = kmeans_with_counts(&frames, 4, 7).unwrap();
        assert_eq!(inertia, 0.0);
        for f in &frames {
            assert!(cb.rows().any(|row| row == f.as_slice()));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let a = kmeans_init(&frames, 8, 42).unwrap();
        let b = kmeans_init(&frames, 8, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_points_rejected() {
        let frames = vec![vec![0.0f64]];
        assert!(matches!(
            kmeans_init(&frames, 2, 0),
            Err(Error::InsufficientData { .. })
        ));
    }
}
