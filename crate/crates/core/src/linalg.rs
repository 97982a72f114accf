//! Small dense linear-algebra helpers (symmetric positive-definite solves)
//! used by the mel pseudo-inverse and the CI-SDR filter fit.

use crate::error::{Error, Result};
use crate::real::Real;

/// Solve `A x = b` for symmetric positive-definite `A` via Cholesky.
/// `a` is consumed as row-major storage and overwritten with the factor.
pub fn solve_spd<F: Real>(mut a: Vec<Vec<F>>, b: &[F]) -> Result<Vec<F>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    // in-place lower Cholesky
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum = sum - a[i][k] * a[j][k];
            }
            if i == j {
                if sum <= F::zero() {
                    return Err(Error::InvalidArgument(
                        "matrix is not positive definite".into(),
                    ));
                }
                a[i][j] = sum.sqrt();
            } else {
                a[i][j] = sum / a[j][j];
            }
        }
    }
    // forward substitution: L y = b
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = a[i][k] * y[k];
            y[i] = y[i] - t;
        }
        y[i] = y[i] / a[i][i];
    }
    // back substitution: L^T x = y
    for i in (0..n).rev() {
        for k in i + 1..n {
            let t = a[k][i] * y[k];
            y[i] = y[i] - t;
        }
        y[i] = y[i] / a[i][i];
    }
    Ok(y)
}
