//! Block diagonalization of a neutrally stable matrix into its
//! imaginary-axis part and its Hurwitz part.

use nalgebra::DMatrix;

use super::matrix::RealMatrix;
use super::schur::{solve_triangular_sylvester, CMatrix, ComplexSchur};
use super::svd::{real_part, Svd};
use super::spectrum::{axis_tolerance, classify, spectrum_dense, AxisClass};
use crate::error::{Error, Result};

/// Off-diagonal block residuals must stay below BLOCK_REL·max(1, ‖A‖_F).
pub const BLOCK_REL: f64 = 1e-8;
/// Eigenvalues tagged Hurwitz must clear the axis band by this factor.
const BOUNDARY_MARGIN: f64 = 10.0;

/// `[U W]⁻¹ A [U W] = blkdiag(F, G)` with F marginal and G Hurwitz.
#[derive(Debug, Clone)]
pub struct ModalDecomposition {
    pub n1: usize,
    pub n2: usize,
    pub u: RealMatrix,
    pub w: RealMatrix,
    pub u_dag: RealMatrix,
    pub w_dag: RealMatrix,
    pub f: RealMatrix,
    pub g: RealMatrix,
}

impl ModalDecomposition {
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    /// Builds the decomposition from caller-chosen bases of the two invariant
    /// subspaces and checks every block invariant against `a`.
    pub fn from_basis(a: &RealMatrix, u: &RealMatrix, w: &RealMatrix) -> Result<Self> {
        let n = a.ensure_square("A")?;
        if u.rows() != n || w.rows() != n || u.cols() + w.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "bases {:?} and {:?} do not split a {n}x{n} matrix",
                u.shape(),
                w.shape()
            )));
        }
        let decomposition = assemble(a.as_dmatrix(), u.as_dmatrix().clone(), w.as_dmatrix().clone())?;
        decomposition.verify(a)?;
        Ok(decomposition)
    }

    /// Largest violation of U†AW = 0, W†AU = 0 and [U†; W†][U W] = I.
    pub fn block_residual(&self, a: &RealMatrix) -> f64 {
        let a = a.as_dmatrix();
        let (u, w) = (self.u.as_dmatrix(), self.w.as_dmatrix());
        let (ud, wd) = (self.u_dag.as_dmatrix(), self.w_dag.as_dmatrix());
        let mut worst: f64 = 0.0;
        for m in [ud * a * w, wd * a * u, ud * w, wd * u] {
            worst = worst.max(max_abs(&m));
        }
        worst = worst.max(max_abs(&(ud * u - DMatrix::identity(self.n1, self.n1))));
        worst = worst.max(max_abs(&(wd * w - DMatrix::identity(self.n2, self.n2))));
        worst
    }

    /// ‖[U W]·blkdiag(F, G)·[U†; W†] − A‖_F.
    pub fn reconstruction_error(&self, a: &RealMatrix) -> f64 {
        let recon = self.u.as_dmatrix() * self.f.as_dmatrix() * self.u_dag.as_dmatrix()
            + self.w.as_dmatrix() * self.g.as_dmatrix() * self.w_dag.as_dmatrix();
        (recon - a.as_dmatrix()).norm()
    }

    fn verify(&self, a: &RealMatrix) -> Result<()> {
        let scale = a.frobenius_norm().max(1.0);
        let residual = self.block_residual(a);
        if residual > BLOCK_REL * scale {
            return Err(Error::IllConditionedSplit(format!(
                "block residual {residual:e} exceeds {:e}",
                BLOCK_REL * scale
            )));
        }
        let tol = axis_tolerance(a.as_dmatrix());
        let f_spec = spectrum_dense(self.f.as_dmatrix())?;
        if f_spec.eigenvalues.iter().any(|z| classify(*z, tol) != AxisClass::OnAxis) {
            return Err(Error::IllConditionedSplit("F has eigenvalues off the imaginary axis".into()));
        }
        let g_spec = spectrum_dense(self.g.as_dmatrix())?;
        if g_spec.eigenvalues.iter().any(|z| classify(*z, tol) != AxisClass::NegativeRealPart) {
            return Err(Error::IllConditionedSplit("G is not Hurwitz".into()));
        }
        Ok(())
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.amax()
    }
}

fn assemble(a: &DMatrix<f64>, u: DMatrix<f64>, w: DMatrix<f64>) -> Result<ModalDecomposition> {
    let n = a.nrows();
    let (n1, n2) = (u.ncols(), w.ncols());
    let mut basis = DMatrix::zeros(n, n);
    basis.columns_mut(0, n1).copy_from(&u);
    basis.columns_mut(n1, n2).copy_from(&w);
    let inverse = if n == 0 {
        DMatrix::zeros(0, 0)
    } else {
        basis
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::IllConditionedSplit("[U W] is singular".into()))?
    };
    let u_dag = inverse.rows(0, n1).into_owned();
    let w_dag = inverse.rows(n1, n2).into_owned();
    let f = &u_dag * a * &u;
    let g = &w_dag * a * &w;
    Ok(ModalDecomposition {
        n1,
        n2,
        u: RealMatrix::from_dmatrix(u)?,
        w: RealMatrix::from_dmatrix(w)?,
        u_dag: RealMatrix::from_dmatrix(u_dag)?,
        w_dag: RealMatrix::from_dmatrix(w_dag)?,
        f: RealMatrix::from_dmatrix(f)?,
        g: RealMatrix::from_dmatrix(g)?,
    })
}

/// Orthonormal real basis of a conjugation-closed complex subspace.
fn real_basis(z: &CMatrix) -> Result<DMatrix<f64>> {
    let (n, k) = z.shape();
    if k == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let mut stacked = DMatrix::zeros(n, 2 * k);
    stacked.columns_mut(0, k).copy_from(&z.map(|c| c.re));
    stacked.columns_mut(k, k).copy_from(&z.map(|c| c.im));
    let svd = Svd::real(&stacked)?;
    let sv = &svd.singular_values;
    let leading = sv[0];
    if sv[k - 1] <= 1e-8 * leading {
        return Err(Error::IllConditionedSplit("invariant subspace lost rank".into()));
    }
    if sv.len() > k && sv[k] > 1e-6 * leading {
        return Err(Error::IllConditionedSplit(
            "invariant subspace is not closed under conjugation".into(),
        ));
    }
    Ok(real_part(&svd.u.columns(0, k).into_owned()))
}

/// Splits a neutrally stable `A` into imaginary-axis and Hurwitz blocks.
///
/// Orders the complex Schur form so the on-axis eigenvalues lead, removes the
/// coupling block with a triangular Sylvester solve, and takes real bases of
/// the two resulting invariant subspaces. When one block is empty the
/// identity basis is used, so `F = A` (or `G = A`) exactly.
pub fn modal_split(a: &RealMatrix) -> Result<ModalDecomposition> {
    let n = a.ensure_square("A")?;
    let ad = a.as_dmatrix();
    let report = spectrum_dense(ad)?;
    if report.has_positive() || !report.on_axis_semisimple {
        return Err(Error::InvalidArgument("modal split requires a neutrally stable matrix".into()));
    }
    let tol = report.axis_tolerance;
    if let Some(abscissa) = report.hurwitz_abscissa() {
        if abscissa > -BOUNDARY_MARGIN * tol {
            return Err(Error::IllConditionedSplit(format!(
                "eigenvalue with real part {abscissa:e} too close to the imaginary axis"
            )));
        }
    }
    let n1 = report.count(AxisClass::OnAxis);
    let n2 = n - n1;
    if n1 == 0 || n2 == 0 {
        let (u, w) = if n1 == 0 {
            (DMatrix::zeros(n, 0), DMatrix::identity(n, n))
        } else {
            (DMatrix::identity(n, n), DMatrix::zeros(n, 0))
        };
        let d = assemble(ad, u, w)?;
        d.verify(a)?;
        return Ok(d);
    }

    let mut schur = ComplexSchur::new(ad)?;
    let leading = schur.reorder(|z| classify(z, tol) == AxisClass::OnAxis);
    if leading != n1 {
        return Err(Error::IllConditionedSplit(format!(
            "Schur form has {leading} on-axis eigenvalues, spectrum has {n1}"
        )));
    }
    let t11 = schur.t.view((0, 0), (n1, n1)).into_owned();
    let t12 = schur.t.view((0, n1), (n1, n2)).into_owned();
    let t22 = schur.t.view((n1, n1), (n2, n2)).into_owned();
    // T11·Y − Y·T22 = −T12 block-diagonalizes the Schur form.
    let y = solve_triangular_sylvester(&t11, &(-t22), &(-t12))?;
    let q1 = schur.q.columns(0, n1).into_owned();
    let q2 = schur.q.columns(n1, n2).into_owned();
    let w_complex = &q1 * y + q2;

    let d = assemble(ad, real_basis(&q1)?, real_basis(&w_complex)?)?;
    d.verify(a)?;
    Ok(d)
}
