//! Complex Schur form with diagonal reordering, and the triangular Sylvester
//! solve that both the modal split and the Lyapunov solver reduce to.

use nalgebra::{DMatrix, Hessenberg};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) type CMatrix = DMatrix<Complex64>;

/// QR sweeps allowed per eigenvalue.
const SCHUR_ITER_PER_EIG: usize = 60;

pub(crate) fn complexify(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Unitary Q and upper-triangular T with A = Q T Qᴴ.
pub(crate) struct ComplexSchur {
    pub q: CMatrix,
    pub t: CMatrix,
}

impl ComplexSchur {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Ok(ComplexSchur {
                q: CMatrix::zeros(0, 0),
                t: CMatrix::zeros(0, 0),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigenFailure("non-finite input to the Schur decomposition".into()));
        }
        let (mut q, mut t) = Hessenberg::new(complexify(a)).unpack();
        hessenberg_qr(&mut t, &mut q)?;
        // Clear round-off below the diagonal so T is exactly triangular.
        for j in 0..n {
            for i in (j + 1)..n {
                t[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        if t.iter().chain(q.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::EigenFailure("non-finite Schur factors".into()));
        }
        Ok(ComplexSchur { q, t })
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Swaps diagonal entries k and k+1 by a unitary rotation.
    fn swap(&mut self, k: usize) {
        let n = self.t.nrows();
        let t11 = self.t[(k, k)];
        let t22 = self.t[(k + 1, k + 1)];
        let (cs, sn) = givens(self.t[(k, k + 1)], t22 - t11);

        // Rows k, k+1 from column k+2 on.
        for j in (k + 2)..n {
            let x = self.t[(k, j)];
            let y = self.t[(k + 1, j)];
            self.t[(k, j)] = x * cs + sn * y;
            self.t[(k + 1, j)] = y * cs - sn.conj() * x;
        }
        // Columns k, k+1 above row k.
        let snc = sn.conj();
        for i in 0..k {
            let x = self.t[(i, k)];
            let y = self.t[(i, k + 1)];
            self.t[(i, k)] = x * cs + snc * y;
            self.t[(i, k + 1)] = y * cs - snc.conj() * x;
        }
        self.t[(k, k)] = t22;
        self.t[(k + 1, k + 1)] = t11;
        for i in 0..n {
            let x = self.q[(i, k)];
            let y = self.q[(i, k + 1)];
            self.q[(i, k)] = x * cs + snc * y;
            self.q[(i, k + 1)] = y * cs - snc.conj() * x;
        }
    }

    /// Moves every diagonal entry satisfying `leading` ahead of the rest,
    /// keeping relative order within each group. Returns the leading count.
    pub fn reorder<F: Fn(Complex64) -> bool>(&mut self, leading: F) -> usize {
        let n = self.t.nrows();
        let mut placed = 0;
        for i in 0..n {
            if leading(self.t[(i, i)]) {
                let mut k = i;
                while k > placed {
                    self.swap(k - 1);
                    k -= 1;
                }
                placed += 1;
            }
        }
        placed
    }
}

/// Rotation (c real, s complex) with [c s; -s̄ c]·[f; g] = [r; 0].
/// Single-shift complex QR on an upper Hessenberg H, accumulating the
/// rotations into Z. Wilkinson shifts, with an exceptional shift every tenth
/// sweep that fails to deflate.
fn hessenberg_qr(h: &mut CMatrix, z: &mut CMatrix) -> Result<()> {
    let n = h.nrows();
    if n < 2 {
        return Ok(());
    }
    let hnorm = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let small = f64::MIN_POSITIVE * n as f64 / f64::EPSILON;
    let budget = SCHUR_ITER_PER_EIG * n;
    let mut total = 0;
    let mut its = 0;
    let mut hi = n - 1;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let mut s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if s == 0.0 {
                s = hnorm;
            }
            let sub = h[(lo, lo - 1)].norm();
            if sub <= f64::EPSILON * s || sub <= small {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        total += 1;
        its += 1;
        if total > budget {
            return Err(Error::EigenFailure("complex Schur iteration did not converge".into()));
        }
        let shift = if its % 10 == 0 {
            h[(hi, hi)] + 0.75 * h[(hi, hi - 1)].re.abs()
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        for k in lo..hi {
            let (f, g) = if k == lo {
                (h[(k, k)] - shift, h[(k + 1, k)])
            } else {
                (h[(k, k - 1)], h[(k + 1, k - 1)])
            };
            let (cs, sn) = givens(f, g);
            let first = if k == lo { k } else { k - 1 };
            for j in first..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * cs + sn * y;
                h[(k + 1, j)] = y * cs - sn.conj() * x;
            }
            if k > lo {
                h[(k + 1, k - 1)] = Complex64::new(0.0, 0.0);
            }
            let snc = sn.conj();
            for i in 0..=(k + 2).min(hi) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * cs + y * snc;
                h[(i, k + 1)] = y * cs - x * sn;
            }
            for i in 0..n {
                let x = z[(i, k)];
                let y = z[(i, k + 1)];
                z[(i, k)] = x * cs + y * snc;
                z[(i, k + 1)] = y * cs - x * sn;
            }
        }
    }
    Ok(())
}

/// Eigenvalue of [[a, b], [c, d]] closest to d.
fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let (l1, l2) = (mid + disc, mid - disc);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let fa = f.norm();
    let ga = g.norm();
    if ga == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if fa == 0.0 {
        return (0.0, g.conj() / ga);
    }
    let rho = fa.hypot(ga);
    (fa / rho, (f / fa) * g.conj() / rho)
}

/// Solves T1·Y + Y·T2 = C for upper-triangular T1 (a×a) and T2 (b×b).
pub(crate) fn solve_triangular_sylvester(t1: &CMatrix, t2: &CMatrix, c: &CMatrix) -> Result<CMatrix> {
    let a = t1.nrows();
    let b = t2.nrows();
    let scale = t1.iter().chain(t2.iter()).map(|z| z.norm()).fold(1.0, f64::max);
    let mut y = CMatrix::zeros(a, b);
    for k in 0..b {
        let mut rhs: Vec<Complex64> = (0..a).map(|i| c[(i, k)]).collect();
        for j in 0..k {
            let coeff = t2[(j, k)];
            if coeff.norm() != 0.0 {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= y[(i, j)] * coeff;
                }
            }
        }
        let shift = t2[(k, k)];
        for i in (0..a).rev() {
            let mut acc = rhs[i];
            for l in (i + 1)..a {
                acc -= t1[(i, l)] * y[(l, k)];
            }
            let pivot = t1[(i, i)] + shift;
            if pivot.norm() <= 1e-14 * scale {
                return Err(Error::SingularEquation(format!(
                    "spectra of the two coefficients overlap (pivot {:e})",
                    pivot.norm()
                )));
            }
            y[(i, k)] = acc / pivot;
        }
    }
    Ok(y)
}
