//! Small dense linear-algebra helpers on top of `nalgebra`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Reciprocal condition number below which a symmetric matrix is treated as singular.
pub const RCOND_MIN: f64 = 1e-12;

/// Inverse of a symmetric matrix by eigendecomposition, with its reciprocal
/// condition number `min|lambda| / max|lambda|`.
pub fn sym_inverse(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let d = a.nrows();
    if d == 0 {
        return Ok((DMatrix::zeros(0, 0), 1.0));
    }
    let sym = symmetrize(a);
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInformation(0.0));
    }
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let rcond = if max > 0.0 { min / max } else { 0.0 };
    if !(rcond >= RCOND_MIN) {
        return Err(Error::SingularInformation(rcond));
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    Ok((symmetrize(&inv), rcond))
}

/// `(A + A^T) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v))
}

/// Spectral norm of a symmetric matrix.
pub fn sym_spectral_norm(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
}

/// Ordinary least squares `argmin |X b - y|` via SVD; `rows` holds the rows of `X`.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let n = rows.len();
    if n == 0 || n != y.len() {
        return None;
    }
    let k = rows[0].len();
    let x = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let svd = x.svd(true, true);
    let b = svd.solve(&DVector::from_column_slice(y), 1e-12).ok()?;
    let out: Vec<f64> = b.iter().copied().collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Numerical rank of `R` (singular values above `1e-10 * max`).
pub fn rank(r: &DMatrix<f64>) -> usize {
    if r.is_empty() {
        return 0;
    }
    let sv = r.clone().svd(false, false).singular_values;
    let max = sv.iter().fold(0.0f64, |m, &v| m.max(v));
    sv.iter().filter(|&&v| v > 1e-10 * max).count()
}

/// Orthonormal basis of the null space of `R` (columns), from the eigenvectors
/// of `R^T R` with vanishing eigenvalues.
pub fn null_space(r: &DMatrix<f64>) -> DMatrix<f64> {
    let d = r.ncols();
    let rtr = r.transpose() * r;
    let eig = SymmetricEigen::new(rtr);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
    let cols: Vec<DVector<f64>> = (0..d)
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-10 * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_spd() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let (inv, rcond) = sym_inverse(&a).unwrap();
        assert!(rcond > 0.1);
        let id = &a * &inv;
        assert!((id - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(sym_inverse(&a), Err(Error::SingularInformation(_))));
    }

    #[test]
    fn null_space_is_orthogonal_to_rows() {
        let r = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 2.0, 3.0]);
        let n = null_space(&r);
        assert_eq!(n.ncols(), 3);
        assert!((&r * &n).norm() < 1e-12);
        assert!((n.transpose() * &n - DMatrix::identity(3, 3)).norm() < 1e-12);
        assert_eq!(rank(&r), 1);
    }

    #[test]
    fn least_squares_recovers_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| alloc::vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 + 0.5 * i as f64).collect();
        let b = least_squares(&rows, &y).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] - 0.5).abs() < 1e-12);
    }
}
