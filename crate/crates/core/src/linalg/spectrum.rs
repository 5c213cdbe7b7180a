//! Eigenvalue classification relative to the imaginary axis, neutral
//! stability, and PBH detectability / stabilizability tests.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::matrix::RealMatrix;
use super::schur::{complexify, CMatrix, ComplexSchur};
use super::svd::Svd;
use crate::error::{Error, Result};

/// Relative scale of the imaginary-axis band: ε_axis = AXIS_REL·max(1, ‖M‖_F).
pub const AXIS_REL: f64 = 1e-9;
/// Singular values below RANK_REL·σ_max count as zero in rank decisions.
pub const RANK_REL: f64 = 1e-10;
/// On-axis eigenvalues closer than CLUSTER_REL·max(1, ‖M‖_F) are treated as
/// one repeated eigenvalue when testing semisimplicity.
pub const CLUSTER_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisClass {
    NegativeRealPart,
    OnAxis,
    PositiveRealPart,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub axis_classification: Vec<AxisClass>,
    pub on_axis_semisimple: bool,
    /// The tolerance used for the classification.
    pub axis_tolerance: f64,
}

impl SpectrumReport {
    pub fn count(&self, class: AxisClass) -> usize {
        self.axis_classification.iter().filter(|c| **c == class).count()
    }

    pub fn has_positive(&self) -> bool {
        self.count(AxisClass::PositiveRealPart) > 0
    }

    /// Largest real part among eigenvalues tagged negative, if any.
    pub fn hurwitz_abscissa(&self) -> Option<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.axis_classification)
            .filter(|(_, c)| **c == AxisClass::NegativeRealPart)
            .map(|(z, _)| z.re)
            .reduce(f64::max)
    }
}

pub(crate) fn axis_tolerance(m: &DMatrix<f64>) -> f64 {
    AXIS_REL * m.norm().max(1.0)
}

pub(crate) fn classify(z: Complex64, tol: f64) -> AxisClass {
    if z.re > tol {
        AxisClass::PositiveRealPart
    } else if z.re < -tol {
        AxisClass::NegativeRealPart
    } else {
        AxisClass::OnAxis
    }
}

/// Groups values whose mutual distance chains stay within `tol`.
pub(crate) fn cluster(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut owner: Vec<Option<usize>> = vec![None; values.len()];
    for i in 0..values.len() {
        if owner[i].is_some() {
            continue;
        }
        let g = groups.len();
        owner[i] = Some(g);
        let mut members = vec![i];
        let mut cursor = 0;
        while cursor < members.len() {
            let cur = members[cursor];
            for j in 0..values.len() {
                if owner[j].is_none() && (values[j] - values[cur]).norm() <= tol {
                    owner[j] = Some(g);
                    members.push(j);
                }
            }
            cursor += 1;
        }
        groups.push(members);
    }
    groups
}

pub(crate) fn mean(values: &[Complex64], idx: &[usize]) -> Complex64 {
    idx.iter().map(|&i| values[i]).sum::<Complex64>() / idx.len() as f64
}

/// Descending singular values of a complex matrix.
pub(crate) fn singular_values(m: CMatrix) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    Ok(Svd::new(&m)?.singular_values)
}

pub(crate) fn shifted(m: &DMatrix<f64>, lambda: Complex64) -> CMatrix {
    let mut s = complexify(m);
    for i in 0..m.nrows() {
        s[(i, i)] -= lambda;
    }
    s
}

/// Geometric multiplicity of a cluster of nearly equal eigenvalues, decided
/// with a cutoff that also absorbs the cluster's own spread.
pub(crate) fn cluster_geometric_multiplicity(m: &DMatrix<f64>, center: Complex64, spread: f64) -> Result<usize> {
    let sv = singular_values(shifted(m, center))?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let cutoff = (RANK_REL * smax).max(100.0 * spread);
    Ok(sv.iter().filter(|s| **s <= cutoff).count())
}

pub(crate) fn spectrum_dense(m: &DMatrix<f64>) -> Result<SpectrumReport> {
    let eigenvalues = ComplexSchur::new(m)?.eigenvalues();
    let tol = axis_tolerance(m);
    let axis_classification: Vec<AxisClass> = eigenvalues.iter().map(|z| classify(*z, tol)).collect();

    let on_axis: Vec<Complex64> = eigenvalues
        .iter()
        .zip(&axis_classification)
        .filter(|(_, c)| **c == AxisClass::OnAxis)
        .map(|(z, _)| *z)
        .collect();
    let cluster_tol = CLUSTER_REL * m.norm().max(1.0);
    let mut on_axis_semisimple = true;
    for idx in cluster(&on_axis, cluster_tol) {
        let center = mean(&on_axis, &idx);
        let spread = idx.iter().map(|&i| (on_axis[i] - center).norm()).fold(0.0, f64::max);
        if cluster_geometric_multiplicity(m, center, spread)? < idx.len() {
            on_axis_semisimple = false;
            break;
        }
    }

    Ok(SpectrumReport {
        eigenvalues,
        axis_classification,
        on_axis_semisimple,
        axis_tolerance: tol,
    })
}

/// Eigenvalues of a square matrix, tagged against the imaginary axis.
pub fn spectrum(m: &RealMatrix) -> Result<SpectrumReport> {
    m.ensure_square("spectrum argument")?;
    spectrum_dense(m.as_dmatrix())
}

/// No eigenvalue in the open right half-plane and every imaginary-axis
/// eigenvalue semisimple.
pub fn is_neutrally_stable(m: &RealMatrix) -> Result<bool> {
    let report = spectrum(m)?;
    Ok(!report.has_positive() && report.on_axis_semisimple)
}

/// PBH test: rank [A − λI; C] = n for every eigenvalue with Re λ ≥ −ε_axis.
pub fn is_detectable(c: &RealMatrix, a: &RealMatrix) -> Result<bool> {
    let n = a.ensure_square("A")?;
    if c.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "C has {} columns but A is {n}x{n}",
            c.cols()
        )));
    }
    let a = a.as_dmatrix();
    let tol = axis_tolerance(a);
    let eigenvalues = ComplexSchur::new(a)?.eigenvalues();
    let cc = complexify(c.as_dmatrix());
    for lambda in eigenvalues.into_iter().filter(|z| z.re >= -tol) {
        let shifted = shifted(a, lambda);
        let mut stacked = CMatrix::zeros(n + c.rows(), n);
        stacked.rows_mut(0, n).copy_from(&shifted);
        stacked.rows_mut(n, c.rows()).copy_from(&cc);
        let sv = singular_values(stacked)?;
        let cutoff = RANK_REL * sv.first().copied().unwrap_or(0.0);
        let rank = sv.iter().filter(|s| **s > cutoff).count();
        if rank < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Dual of [`is_detectable`]: (A, B) stabilizable iff (Bᵀ, Aᵀ) detectable.
pub fn is_stabilizable(a: &RealMatrix, b: &RealMatrix) -> Result<bool> {
    if b.rows() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "B has {} rows but A has {}",
            b.rows(),
            a.rows()
        )));
    }
    is_detectable(&b.transpose(), &a.transpose())
}
