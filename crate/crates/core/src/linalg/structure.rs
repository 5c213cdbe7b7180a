use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::RealMatrix;
use crate::error::{Error, Result};

/// Symmetry tolerance relative to max(1, ‖P‖_F).
pub const SYMMETRY_REL: f64 = 1e-9;
/// Smallest admissible eigenvalue, relative to max(1, ‖P‖_F).
pub const PD_REL: f64 = 1e-13;

/// ‖M + Mᵀ‖_F ≤ tol·max(1, ‖M‖_F).
pub fn is_skew_symmetric(m: &RealMatrix, tol: f64) -> Result<bool> {
    m.ensure_square("skew-symmetry argument")?;
    Ok(skew_residual(m.as_dmatrix()) <= tol * m.frobenius_norm().max(1.0))
}

pub(crate) fn skew_residual(m: &DMatrix<f64>) -> f64 {
    (m + m.transpose()).norm()
}

/// Symmetric positive definite square root of an SPD matrix.
pub fn spd_sqrt(p: &RealMatrix) -> Result<RealMatrix> {
    p.ensure_square("square-root argument")?;
    RealMatrix::from_dmatrix(spd_power(p.as_dmatrix(), 0.5)?)
}

/// P^s for symmetric positive definite P via its eigendecomposition.
pub(crate) fn spd_power(p: &DMatrix<f64>, exponent: f64) -> Result<DMatrix<f64>> {
    let scale = p.norm().max(1.0);
    let asym = (p - p.transpose()).norm();
    if asym > SYMMETRY_REL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    if p.is_empty() {
        return Ok(p.clone());
    }
    let sym = (p + p.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lmin = eig.eigenvalues.min();
    if lmin <= PD_REL * scale {
        return Err(Error::NotPositiveDefinite(lmin));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(exponent)));
    let r = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skew_examples() {
        let rot = RealMatrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        assert!(is_skew_symmetric(&rot, 1e-12).unwrap());
        assert!(!is_skew_symmetric(&RealMatrix::identity(2), 1e-12).unwrap());
        assert!(is_skew_symmetric(&RealMatrix::zeros(3, 3), 0.0).unwrap());
        assert!(is_skew_symmetric(&RealMatrix::zeros(2, 3), 1e-12).is_err());
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(spd_sqrt(&RealMatrix::identity(3)).unwrap(), RealMatrix::identity(3));
        let r = spd_sqrt(&RealMatrix::from_diagonal(&[4.0, 9.0]).unwrap()).unwrap();
        assert!((r.get(0, 0) - 2.0).abs() < 1e-15 && (r.get(1, 1) - 3.0).abs() < 1e-15);
        assert_eq!(r.get(0, 1), 0.0);
    }

    #[test]
    fn sqrt_squares_back() {
        let p = RealMatrix::from_diagonal(&[0.625, 2.5]).unwrap();
        let r = spd_sqrt(&p).unwrap();
        assert!((r.get(0, 0) - 0.625f64.sqrt()).abs() < 1e-15);
        assert!((r.get(1, 1) - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((&(&r * &r) - &p).max_abs() < 1e-15);

        let full = RealMatrix::from_rows(&[[2.0, 0.5, 0.1], [0.5, 1.0, -0.2], [0.1, -0.2, 0.7]]).unwrap();
        let r = spd_sqrt(&full).unwrap();
        assert!((&(&r * &r) - &full).max_abs() < 1e-14);
        assert!((&r - &r.transpose()).max_abs() == 0.0);
    }

    #[test]
    fn sqrt_errors() {
        let asym = RealMatrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(spd_sqrt(&asym), Err(Error::NotSymmetric(_))));
        let indef = RealMatrix::from_diagonal(&[1.0, -1.0]).unwrap();
        assert!(matches!(spd_sqrt(&indef), Err(Error::NotPositiveDefinite(_))));
        let singular = RealMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(spd_sqrt(&singular), Err(Error::NotPositiveDefinite(_))));
    }
}
