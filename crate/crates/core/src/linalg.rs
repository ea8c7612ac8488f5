//! Dense helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Orthonormal basis of the column span (thin QR); fails on rank loss.
pub fn orthonormalize(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = b.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let qr = b.clone().qr();
    let r = qr.r();
    for i in 0..b.ncols() {
        if !(r[(i, i)].abs() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::Degenerate(format!(
                "basis of rank < {} (pivot {})",
                b.ncols(),
                r[(i, i)]
            )));
        }
    }
    Ok(qr.q())
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().min()
}

/// Sine of the largest principal angle between the spans of two
/// orthonormal bases of equal rank.
pub fn subspace_sin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let proj = b * (b.transpose() * a);
    spectral_norm(&(a - proj)).min(1.0)
}

/// Largest principal angle in radians.
pub fn subspace_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    subspace_sin(a, b).asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_between_lines() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let t = 0.3f64;
        let b = DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]);
        assert!((subspace_angle(&a, &b) - t).abs() < 1e-12);
        assert!(orthonormalize(&DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 2.0, 2.0])).is_err());
    }
}
