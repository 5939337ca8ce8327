// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear-algebra helpers shared across the crate.
//!
//! Everything here is desk scale: matrices are dense `DMatrix<Complex64>`,
//! spectral quantities come from full SVD or Hermitian eigensolves.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Iteration budget for iterative decompositions, scaled with dimension.
fn iter_budget(n: usize) -> usize {
    100 * n.max(10) + 1000
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn creal(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// (A + A†)/2.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * creal(0.5)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max_hermitian(h: &CMat) -> Result<f64> {
    let eig = h
        .clone()
        .try_symmetric_eigen(f64::EPSILON, iter_budget(h.nrows()))
        .ok_or(Error::NonHermitianEigenFailure)?;
    Ok(eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max))
}

fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    let svd = a
        .clone()
        .try_svd(false, false, f64::EPSILON, iter_budget(a.nrows().max(a.ncols())))
        .ok_or(Error::NonHermitianEigenFailure)?;
    Ok(svd.singular_values.iter().cloned().collect())
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    singular_values(a)
        .map(|sv| sv.into_iter().fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

/// Smallest singular value.
pub fn sigma_min(a: &CMat) -> f64 {
    singular_values(a)
        .map(|sv| sv.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN)
}

/// (sigma_max, sigma_min) in one decomposition.
pub fn sigma_extremes(a: &CMat) -> Result<(f64, f64)> {
    let sv = singular_values(a)?;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((max, min))
}

/// Solve A X = B by LU; `None` turned into a `SingularBlock` at `row`.
pub fn lu_solve(a: &CMat, b: &CMat, row: usize) -> Result<CMat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularBlock { row })
}

pub fn lu_solve_vec(a: &CMat, b: &CVec, row: usize) -> Result<CVec> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularBlock { row })
}

pub fn try_inverse(a: &CMat, row: usize) -> Result<CMat> {
    a.clone()
        .try_inverse()
        .ok_or(Error::SingularBlock { row })
}

/// Hermitian PSD square root via eigendecomposition; negative eigenvalues
/// from roundoff are clamped to zero.
pub fn sqrt_psd(h: &CMat) -> Result<CMat> {
    let eig = h
        .clone()
        .try_symmetric_eigen(f64::EPSILON, iter_budget(h.nrows()))
        .ok_or(Error::NonHermitianEigenFailure)?;
    let vecs = eig.eigenvectors;
    let mut d = CMat::zeros(h.nrows(), h.ncols());
    for (i, lam) in eig.eigenvalues.iter().enumerate() {
        d[(i, i)] = creal(lam.max(0.0).sqrt());
    }
    Ok(&vecs * d * vecs.adjoint())
}

/// ‖U†U − I‖ in spectral norm.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.ncols();
    spectral_norm(&(u.adjoint() * u - identity(n)))
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    spectral_norm(&(a - a.adjoint())) <= tol * (1.0 + spectral_norm(a))
}

/// Build a matrix from row-major nested slices of complex entries.
pub fn cmat_from_rows(rows: &[Vec<C64>]) -> Result<CMat> {
    let nr = rows.len();
    if nr == 0 {
        return Err(Error::ShapeMismatch("empty matrix".into()));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::ShapeMismatch("ragged matrix rows".into()));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn cmat_from_real(rows: &[&[f64]]) -> CMat {
    CMat::from_fn(rows.len(), rows[0].len(), |i, j| creal(rows[i][j]))
}

/// Least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = cmat_from_real(&[&[3.0, 0.0], &[0.0, -1.0]]);
        assert_relative_eq!(spectral_norm(&a), 3.0, max_relative = 1e-12);
        assert_relative_eq!(sigma_min(&a), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn lambda_max_of_hermitian() {
        // (A + A†)/2 for A = [[-1, 5], [0, -1]] is [[-1, 2.5], [2.5, -1]].
        let a = cmat_from_real(&[&[-1.0, 5.0], &[0.0, -1.0]]);
        let h = hermitian_part(&a);
        assert_relative_eq!(lambda_max_hermitian(&h).unwrap(), 1.5, max_relative = 1e-12);
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let a = cmat_from_real(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let s = sqrt_psd(&a).unwrap();
        assert!(spectral_norm(&(&s * &s - a)) < 1e-12);
    }
}
