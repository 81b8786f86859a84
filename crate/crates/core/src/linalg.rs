//! Small dense linear-algebra helpers shared by the filter and the bound.
//!
//! Every inverse goes through a Cholesky factorization; a failed
//! factorization is reported as [`Error::Numerical`].

use nalgebra::{Cholesky, DMatrix, SMatrix};

use crate::error::{Error, Result};

pub fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_dyn(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn cholesky<const N: usize>(
    m: &SMatrix<f64, N, N>,
    what: &str,
) -> Result<Cholesky<f64, nalgebra::Const<N>>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!("{what} has non-finite entries")));
    }
    Cholesky::new(*m).ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

pub fn cholesky_dyn(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!("{what} has non-finite entries")));
    }
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn spd_inverse<const N: usize>(m: &SMatrix<f64, N, N>, what: &str) -> Result<SMatrix<f64, N, N>> {
    Ok(symmetrize(&cholesky(m, what)?.inverse()))
}

/// Quadratic form `v' M^-1 v` for SPD `M`.
pub fn inv_quad_form<const N: usize>(
    m: &SMatrix<f64, N, N>,
    v: &SMatrix<f64, N, 1>,
    what: &str,
) -> Result<f64> {
    let chol = cholesky(m, what)?;
    let y = chol.l().solve_lower_triangular(v).ok_or_else(|| {
        Error::Numerical(format!("{what}: triangular solve failed"))
    })?;
    Ok(y.norm_squared())
}

/// Loewner-order check: every eigenvalue of the symmetric part is at least
/// `-tol * |trace|`.
pub fn is_psd_dyn(m: &DMatrix<f64>, tol: f64) -> bool {
    let sym = symmetrize_dyn(m);
    let scale = sym.trace().abs().max(f64::MIN_POSITIVE);
    sym.symmetric_eigenvalues().iter().all(|&e| e >= -tol * scale)
}

pub fn is_psd<const N: usize>(m: &SMatrix<f64, N, N>, tol: f64) -> bool {
    is_psd_dyn(&DMatrix::from_column_slice(N, N, m.as_slice()), tol)
}
