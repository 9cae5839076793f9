//! Small dense linear-algebra helpers over `DMatrix<f64>`.
//!
//! Eigenvalue work and pivoted factorizations delegate to nalgebra; the rest
//! of the crate only goes through these wrappers.

use crate::{Error, Mat, Result};

/// Spectral radius (largest eigenvalue modulus) of a square matrix.
pub fn spectral_radius(m: &Mat) -> f64 {
    assert!(m.is_square(), "spectral radius needs a square matrix");
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a symmetric matrix, unordered.
pub fn symmetric_eigenvalues(m: &Mat) -> Vec<f64> {
    assert!(m.is_square(), "eigenvalues need a square matrix");
    m.clone().symmetric_eigenvalues().iter().copied().collect()
}

/// Largest singular value of a symmetric matrix (= largest |eigenvalue|).
pub fn symmetric_sigma_max(m: &Mat) -> f64 {
    symmetric_eigenvalues(m).iter().map(|l| l.abs()).fold(0.0, f64::max)
}

/// Solve `A X = B` by column-pivoted QR, verifying the residual.
///
/// Fails with [`Error::Singular`] when the factorization cannot solve the
/// system or the relative residual exceeds `1e-10`.
pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(Error::shape(
            format!("square A with A.nrows == B.nrows ({})", b.nrows()),
            format!("A {}x{}, B {}x{}", a.nrows(), a.ncols(), b.nrows(), b.ncols()),
        ));
    }
    let qr = a.clone().col_piv_qr();
    let x = qr
        .solve(b)
        .ok_or_else(|| Error::Singular("column-pivoted QR solve failed".into()))?;
    let residual = (a * &x - b).norm();
    let scale = b.norm().max(1.0);
    if !(residual / scale <= 1e-10) {
        return Err(Error::Singular(format!(
            "solution residual {:.3e} exceeds 1e-10 of rhs norm (system is near-singular)",
            residual / scale
        )));
    }
    Ok(x)
}

/// `m^power` by repeated squaring.
pub fn matrix_power(m: &Mat, power: usize) -> Mat {
    assert!(m.is_square(), "matrix power needs a square matrix");
    let mut result = Mat::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    let mut e = power;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    result
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "slope fit needs at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
