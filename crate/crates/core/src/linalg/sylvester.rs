//! Bartels–Stewart solvers on the complex Schur form.

use nalgebra::DMatrix;

use super::matrix::RealMatrix;
use super::schur::{complexify, solve_triangular_sylvester, ComplexSchur};
use crate::error::{Error, Result};

/// Solves A·X + X·B = C.
pub fn solve_sylvester(a: &RealMatrix, b: &RealMatrix, c: &RealMatrix) -> Result<RealMatrix> {
    let m = a.ensure_square("Sylvester coefficient A")?;
    let n = b.ensure_square("Sylvester coefficient B")?;
    if c.shape() != (m, n) {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side is {:?}, expected ({m}, {n})",
            c.shape()
        )));
    }
    RealMatrix::from_dmatrix(sylvester_dense(a.as_dmatrix(), b.as_dmatrix(), c.as_dmatrix())?)
}

pub(crate) fn sylvester_dense(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sa = ComplexSchur::new(a)?;
    let sb = ComplexSchur::new(b)?;
    let rhs = sa.q.adjoint() * complexify(c) * &sb.q;
    let y = solve_triangular_sylvester(&sa.t, &sb.t, &rhs)?;
    let x = &sa.q * y * sb.q.adjoint();
    Ok(x.map(|z| z.re))
}

/// Solves Aᵀ·X + X·A = −Q for X. The result is symmetrized when Q is symmetric.
pub fn solve_lyapunov(a: &RealMatrix, q: &RealMatrix) -> Result<RealMatrix> {
    let n = a.ensure_square("Lyapunov coefficient")?;
    if q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov right-hand side is {:?}, expected ({n}, {n})",
            q.shape()
        )));
    }
    let a = a.as_dmatrix();
    let q = q.as_dmatrix();
    let mut x = sylvester_dense(&a.transpose(), a, &(-q))?;
    if (q - q.transpose()).amax() == 0.0 {
        x = (&x + x.transpose()) * 0.5;
    }
    RealMatrix::from_dmatrix(x)
}
