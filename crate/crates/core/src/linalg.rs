//! Small dense symmetric solves shared by the batch and adaptive fits.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative residual accepted from a solve.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Eigenvalue ratio under which a symmetric matrix is treated as singular.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular along direction {direction:?} (eigenvalue {eigenvalue:e})")]
    Singular { direction: Vec<f64>, eigenvalue: f64 },
    #[error("linear solve residual {residual:e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
}

fn relative_residual(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = a * x - b;
    let scale = b.norm().max(a.norm() * x.norm());
    if scale == 0.0 {
        0.0
    } else {
        r.norm() / scale
    }
}

/// Smallest eigenpair of a symmetric matrix.
pub fn smallest_eigen(a: &DMatrix<f64>) -> (f64, DVector<f64>, f64) {
    let eig = a.clone().symmetric_eigen();
    let (imin, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty matrix");
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (lmin, eig.eigenvectors.column(imin).into_owned(), lmax)
}

/// Solves `a x = b` for symmetric positive semi-definite `a`.
///
/// Cholesky first. If the factorization fails, an eigen-decomposition
/// decides between a singular direction error and an LU solve.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let (lmin, dir, lmax) = smallest_eigen(a);
    if lmin <= RANK_TOL * lmax || lmax == 0.0 {
        return Err(LinalgError::Singular {
            direction: dir.iter().copied().collect(),
            eigenvalue: lmin,
        });
    }
    let mut x = match a.clone().cholesky() {
        Some(ch) => {
            let mut x = ch.solve(b);
            // One step of iterative refinement tightens ill-conditioned cases.
            if relative_residual(a, &x, b) > RESIDUAL_TOL {
                let r = b - a * &x;
                x += ch.solve(&r);
            }
            x
        }
        None => a
            .clone()
            .lu()
            .solve(b)
            .ok_or(LinalgError::Singular {
                direction: dir.iter().copied().collect(),
                eigenvalue: lmin,
            })?,
    };
    let res = relative_residual(a, &x, b);
    // Negated so a NaN residual is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(res <= RESIDUAL_TOL) {
        // Last attempt through LU before giving up.
        if let Some(y) = a.clone().lu().solve(b) {
            if relative_residual(a, &y, b) <= RESIDUAL_TOL {
                x = y;
                return Ok(x);
            }
        }
        return Err(LinalgError::Residual { residual: res });
    }
    Ok(x)
}

/// Replaces `m` by `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
