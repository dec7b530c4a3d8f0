//! Small dense linear-algebra routines used by the readout solve.

use ndarray::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    Shape(&'static str),
}

/// Solve G·X = B for symmetric positive-definite G via Cholesky.
///
/// G is (n, n), B is (n, k); returns X with shape (n, k).
pub fn cholesky_solve(g: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>, LinalgError> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(LinalgError::Shape("G must be square"));
    }
    if b.nrows() != n {
        return Err(LinalgError::Shape("B row count must match G"));
    }
    let l = cholesky(g)?;
    let mut x = b.clone();
    // forward: L y = b, then backward: Lᵀ x = y, column by column
    for mut col in x.columns_mut() {
        for i in 0..n {
            let mut s = col[i];
            for j in 0..i {
                s -= l[[i, j]] * col[j];
            }
            col[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for j in i + 1..n {
                s -= l[[j, i]] * col[j];
            }
            col[i] = s / l[[i, i]];
        }
    }
    Ok(x)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
fn cholesky(g: &Array2<f64>) -> Result<Array2<f64>, LinalgError> {
    let n = g.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(LinalgError::NotPositiveDefinite { row: i, pivot: s });
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn solves_small_spd_system() {
        let g = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![[1.0], [2.0]];
        let x = cholesky_solve(&g, &b).unwrap();
        let r = g.dot(&x) - &b;
        assert_abs_diff_eq!(frobenius(&r), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        let g = array![[1.0, 2.0], [2.0, 1.0]];
        let b = array![[1.0], [1.0]];
        assert!(cholesky_solve(&g, &b).is_err());
    }
}
