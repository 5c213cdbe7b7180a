//! One-sided Jacobi SVD.
//!
//! Every caller asks for ranks or null vectors of rank-deficient matrices,
//! where nalgebra's bidiagonal SVD can lose several digits; the Jacobi
//! iteration keeps full accuracy there.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::schur::{complexify, CMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD A = U·diag(σ)·Vᴴ with σ descending and r = min(rows, cols)
/// columns in U and V. Columns of U (or V for wide input) that belong to
/// σ = 0 are zero; for square input V is always unitary.
pub(crate) struct Svd {
    pub singular_values: Vec<f64>,
    pub u: CMatrix,
    pub v: CMatrix,
}

impl Svd {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let (m, n) = a.shape();
        if m < n {
            let t = Svd::new(&a.adjoint())?;
            return Ok(Svd {
                singular_values: t.singular_values,
                u: t.v,
                v: t.u,
            });
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("SVD input"));
        }
        let mut w = a.clone();
        let mut v = CMatrix::identity(n, n);
        let tol = f64::EPSILON * m.max(1) as f64;
        // Columns this small are round-off; rotating them never settles.
        let negligible = (f64::EPSILON * a.norm()).powi(2);
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let alpha = w.column(p).norm_squared();
                    let beta = w.column(q).norm_squared();
                    if alpha <= negligible || beta <= negligible {
                        continue;
                    }
                    let gamma = w.column(p).dotc(&w.column(q));
                    let g = gamma.norm();
                    if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let phase = gamma / g;
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate(&mut w, p, q, c, s, phase);
                    rotate(&mut v, p, q, c, s, phase);
                }
            }
            if !rotated {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::EigenFailure("Jacobi SVD did not converge".into()));
        }
        let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
        let mut u = CMatrix::zeros(m, n);
        let mut vs = CMatrix::zeros(n, n);
        for (k, &j) in order.iter().enumerate() {
            if norms[j] > 0.0 {
                u.set_column(k, &(w.column(j) / Complex64::new(norms[j], 0.0)));
            }
            vs.set_column(k, &v.column(j));
        }
        Ok(Svd {
            singular_values: order.iter().map(|&j| norms[j]).collect(),
            u,
            v: vs,
        })
    }

    pub fn real(a: &DMatrix<f64>) -> Result<Self> {
        Svd::new(&complexify(a))
    }
}

/// Columns (p, q) ← (c·x − s·ē·y, s·x + c·ē·y), a unitary column rotation.
fn rotate(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let bar = phase.conj();
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, q)] * bar;
        m[(i, p)] = x * c - y * s;
        m[(i, q)] = x * s + y * c;
    }
}

/// Real part of a complex matrix known to be real.
pub(crate) fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}
