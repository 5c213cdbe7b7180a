//! Gain synthesis: the time-averaged Gram matrix of a marginal generator and
//! the output-feedback (L) and state-feedback (K) constructions built on it.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Assumption, Error, Result};
use crate::linalg::schur::CMatrix;
use crate::linalg::svd::Svd;
use crate::linalg::{
    axis_tolerance, cluster, is_detectable, is_neutrally_stable, is_stabilizable, mean, modal_split,
    shifted, skew_residual, spd_power, spectrum_dense, AxisClass, ModalDecomposition, RealMatrix,
};

/// Eigenvalues of F closer than FREQ_REL·max(1, ‖F‖_F) count as one frequency.
pub const FREQ_REL: f64 = 1e-8;
/// Post-synthesis checks: ‖PF + FᵀP‖ and ‖S + Sᵀ‖ relative tolerance.
pub const INVARIANT_REL: f64 = 1e-9;

/// One agent's matrices. `c` is present for output coupling, `b` for state
/// coupling.
#[derive(Debug, Clone)]
pub struct LinearAgent {
    a: RealMatrix,
    c: Option<RealMatrix>,
    b: Option<RealMatrix>,
}

impl LinearAgent {
    /// ẋ = Ax + u, y = Cx. Checks neutral stability and detectability.
    pub fn output_coupled(a: RealMatrix, c: RealMatrix) -> Result<Self> {
        let n = a.ensure_square("A")?;
        if c.cols() != n {
            return Err(Error::DimensionMismatch(format!("C is {:?}, A is {n}x{n}", c.shape())));
        }
        require(is_neutrally_stable(&a)?, Assumption::A1, "A has an unstable or defective mode")?;
        require(is_detectable(&c, &a)?, Assumption::A2, "(C, A) has an undetectable mode")?;
        Ok(LinearAgent { a, c: Some(c), b: None })
    }

    /// ẋ = Ax + Bu. Checks neutral stability and stabilizability.
    pub fn state_coupled(a: RealMatrix, b: RealMatrix) -> Result<Self> {
        let n = a.ensure_square("A")?;
        if b.rows() != n {
            return Err(Error::DimensionMismatch(format!("B is {:?}, A is {n}x{n}", b.shape())));
        }
        require(is_neutrally_stable(&a)?, Assumption::B1, "A has an unstable or defective mode")?;
        require(is_stabilizable(&a, &b)?, Assumption::B2, "(A, B) has an unstabilizable mode")?;
        Ok(LinearAgent { a, c: None, b: Some(b) })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Input/output dimension.
    pub fn m(&self) -> usize {
        match (&self.c, &self.b) {
            (Some(c), _) => c.rows(),
            (None, Some(b)) => b.cols(),
            (None, None) => 0,
        }
    }

    pub fn a(&self) -> &RealMatrix {
        &self.a
    }

    pub fn c(&self) -> Option<&RealMatrix> {
        self.c.as_ref()
    }

    pub fn b(&self) -> Option<&RealMatrix> {
        self.b.as_ref()
    }

    pub fn kind(&self) -> GainKind {
        if self.c.is_some() {
            GainKind::OutputFeedback
        } else {
            GainKind::StateFeedback
        }
    }
}

fn require(ok: bool, assumption: Assumption, detail: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::AssumptionViolated {
            assumption,
            detail: detail.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainKind {
    /// u_i = L z_i with z_i built from output differences.
    OutputFeedback,
    /// u_i = K z_i with z_i built from state differences.
    StateFeedback,
}

/// A synthesized gain with the intermediates used to verify it.
#[derive(Debug, Clone)]
pub struct GainSynthesis {
    pub decomposition: ModalDecomposition,
    pub p: RealMatrix,
    pub p_sqrt: RealMatrix,
    /// S = P^{1/2} F P^{-1/2}
    pub s: RealMatrix,
    /// CUP^{-1/2} (output kind) or (P^{1/2}U†B)ᵀ (state kind).
    pub h: RealMatrix,
    /// L (n×m) or K (m×n).
    pub gain: RealMatrix,
    pub kind: GainKind,
}

/// Residuals of the synthesis invariants, all absolute Frobenius norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisResiduals {
    /// ‖PF + FᵀP‖
    pub commutation: f64,
    /// ‖S + Sᵀ‖
    pub skew: f64,
    /// ‖H − expected H‖
    pub h_mismatch: f64,
    /// ‖gain − formula‖
    pub gain_mismatch: f64,
    /// (H, S) observable for output kind, (S, Hᵀ) controllable for state kind.
    pub pair_ok: bool,
    /// ‖P‖ for scaling.
    pub p_norm: f64,
}

impl SynthesisResiduals {
    pub fn within(&self, rel: f64) -> bool {
        let scale = self.p_norm.max(1.0);
        self.commutation <= rel * scale
            && self.skew <= rel * scale
            && self.h_mismatch <= rel * scale
            && self.gain_mismatch <= rel * scale
            && self.pair_ok
    }
}

impl GainSynthesis {
    /// The coupling matrix M entering Γ⊗M: LC or BK.
    pub fn coupling_matrix(&self, agent: &LinearAgent) -> Result<RealMatrix> {
        match (self.kind, agent.c(), agent.b()) {
            (GainKind::OutputFeedback, Some(c), _) => self.gain.dot(c),
            (GainKind::StateFeedback, _, Some(b)) => b.dot(&self.gain),
            _ => Err(Error::KindMismatch(format!(
                "{:?} gain for an agent without the matching matrix",
                self.kind
            ))),
        }
    }

    /// Recomputes every invariant from the stored matrices and the agent.
    pub fn residuals(&self, agent: &LinearAgent) -> Result<SynthesisResiduals> {
        let d = &self.decomposition;
        let p = self.p.as_dmatrix();
        let f = d.f.as_dmatrix();
        let commutation = norm(&(p * f + f.transpose() * p));
        let skew = if d.n1 == 0 { 0.0 } else { skew_residual(self.s.as_dmatrix()) };
        let (expected_h, expected_gain, pair_ok) = match self.kind {
            GainKind::OutputFeedback => {
                let c = agent
                    .c()
                    .ok_or_else(|| Error::KindMismatch("output gain needs C".into()))?;
                let (h, l) = output_formulas(d, &self.p, c)?;
                let ok = d.n1 == 0 || is_detectable(&self.h, &self.s)?;
                (h, l, ok)
            }
            GainKind::StateFeedback => {
                let b = agent
                    .b()
                    .ok_or_else(|| Error::KindMismatch("state gain needs B".into()))?;
                let (h, k) = state_formulas(d, &self.p, b)?;
                let ok = d.n1 == 0 || is_stabilizable(&self.s, &self.h.transpose())?;
                (h, k, ok)
            }
        };
        Ok(SynthesisResiduals {
            commutation,
            skew,
            h_mismatch: norm(&(self.h.as_dmatrix() - expected_h)),
            gain_mismatch: norm(&(self.gain.as_dmatrix() - expected_gain)),
            pair_ok,
            p_norm: norm(p),
        })
    }
}

fn norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.norm()
    }
}

/// P = lim_{t→∞} t⁻¹ ∫₀ᵗ e^{Fᵀτ} e^{Fτ} dτ for F with a semisimple spectrum
/// on the imaginary axis.
///
/// With F = V Λ V⁻¹ the integrand's (j, k) modal entry oscillates as
/// e^{(λ̄_j + λ_k)τ}, so only pairs with λ_j = λ_k survive the average:
/// P = Σ_λ Π_λᴴ Π_λ over the spectral projectors Π_λ of F.
pub fn cesaro_gram(f: &RealMatrix) -> Result<RealMatrix> {
    let n = f.ensure_square("F")?;
    if n == 0 {
        return Ok(RealMatrix::zeros(0, 0));
    }
    let fd = f.as_dmatrix();
    let report = spectrum_dense(fd)?;
    if report.axis_classification.iter().any(|c| *c != AxisClass::OnAxis) {
        return Err(Error::InvalidArgument("F has eigenvalues off the imaginary axis".into()));
    }
    if !report.on_axis_semisimple {
        return Err(Error::InvalidArgument("F is not semisimple on the imaginary axis".into()));
    }
    // The real parts are round-off; project them out before grouping.
    let freqs: Vec<Complex64> = report.eigenvalues.iter().map(|z| Complex64::new(0.0, z.im)).collect();
    let groups = cluster(&freqs, FREQ_REL * fd.norm().max(1.0));

    let mut v = CMatrix::zeros(n, n);
    let mut blocks = Vec::with_capacity(groups.len());
    let mut col = 0;
    for idx in &groups {
        let center = mean(&freqs, idx);
        let k = idx.len();
        let svd = Svd::new(&shifted(fd, center))?;
        v.columns_mut(col, k).copy_from(&svd.v.columns(n - k, k));
        blocks.push((col, k));
        col += k;
    }
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::EigenFailure("eigenvector matrix is singular".into()))?;

    let mut p = CMatrix::zeros(n, n);
    for (start, k) in blocks {
        let projector = v.columns(start, k) * v_inv.rows(start, k);
        p += projector.adjoint() * &projector;
    }
    let p = p.map(|z| z.re);
    let p = (&p + p.transpose()) * 0.5;

    let residual = (&p * fd + fd.transpose() * &p).norm();
    let scale = p.norm() * fd.norm().max(1.0);
    if residual > INVARIANT_REL * scale {
        return Err(Error::ValidationFailed(format!("PF + FᵀP residual {residual:e}")));
    }
    RealMatrix::from_dmatrix(p)
}

fn output_formulas(d: &ModalDecomposition, p: &RealMatrix, c: &RealMatrix) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = c.rows();
    if d.n1 == 0 {
        return Ok((DMatrix::zeros(m, 0), DMatrix::zeros(d.n(), m)));
    }
    let cu = c.as_dmatrix() * d.u.as_dmatrix();
    let p_inv_sqrt = spd_power(p.as_dmatrix(), -0.5)?;
    let p_inv = &p_inv_sqrt * &p_inv_sqrt;
    let h = &cu * &p_inv_sqrt;
    let l = d.u.as_dmatrix() * p_inv * cu.transpose();
    Ok((h, l))
}

fn state_formulas(d: &ModalDecomposition, p: &RealMatrix, b: &RealMatrix) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = b.cols();
    if d.n1 == 0 {
        return Ok((DMatrix::zeros(m, 0), DMatrix::zeros(m, d.n())));
    }
    let udb = d.u_dag.as_dmatrix() * b.as_dmatrix();
    let p_sqrt = spd_power(p.as_dmatrix(), 0.5)?;
    let h = (&p_sqrt * &udb).transpose();
    let k = udb.transpose() * p.as_dmatrix() * d.u_dag.as_dmatrix();
    Ok((h, k))
}

fn build(agent: &LinearAgent, decomposition: ModalDecomposition, kind: GainKind) -> Result<GainSynthesis> {
    let (p, p_sqrt, s) = if decomposition.n1 == 0 {
        (RealMatrix::zeros(0, 0), RealMatrix::zeros(0, 0), RealMatrix::zeros(0, 0))
    } else {
        let p = cesaro_gram(&decomposition.f)?;
        let p_sqrt = spd_power(p.as_dmatrix(), 0.5)?;
        let p_inv_sqrt = spd_power(p.as_dmatrix(), -0.5)?;
        let s = &p_sqrt * decomposition.f.as_dmatrix() * &p_inv_sqrt;
        (p, RealMatrix::from_dmatrix(p_sqrt)?, RealMatrix::from_dmatrix(s)?)
    };
    let (h, gain) = match kind {
        GainKind::OutputFeedback => {
            let c = agent.c().ok_or_else(|| Error::KindMismatch("agent has no C".into()))?;
            output_formulas(&decomposition, &p, c)?
        }
        GainKind::StateFeedback => {
            let b = agent.b().ok_or_else(|| Error::KindMismatch("agent has no B".into()))?;
            state_formulas(&decomposition, &p, b)?
        }
    };
    let synthesis = GainSynthesis {
        decomposition,
        p,
        p_sqrt,
        s,
        h: RealMatrix::from_dmatrix(h)?,
        gain: RealMatrix::from_dmatrix(gain)?,
        kind,
    };

    let residuals = synthesis.residuals(agent)?;
    if !residuals.within(INVARIANT_REL * synthesis.decomposition.f.frobenius_norm().max(1.0)) {
        return Err(Error::ValidationFailed(format!("{residuals:?}")));
    }
    Ok(synthesis)
}

/// Output-feedback gain L = U P⁻¹ (CU)ᵀ, or L = 0 when A is Hurwitz.
pub fn synthesize_output_gain(agent: &LinearAgent) -> Result<GainSynthesis> {
    if agent.c().is_none() {
        return Err(Error::KindMismatch("output-feedback synthesis needs C".into()));
    }
    build(agent, modal_split(agent.a())?, GainKind::OutputFeedback)
}

/// State-feedback gain K = (U†B)ᵀ P U†, or K = 0 when A is Hurwitz.
pub fn synthesize_state_gain(agent: &LinearAgent) -> Result<GainSynthesis> {
    if agent.b().is_none() {
        return Err(Error::KindMismatch("state-feedback synthesis needs B".into()));
    }
    build(agent, modal_split(agent.a())?, GainKind::StateFeedback)
}

/// Synthesizes with a caller-supplied modal split of the agent's A.
pub fn synthesize_with_split(agent: &LinearAgent, split: ModalDecomposition) -> Result<GainSynthesis> {
    let scale = agent.a().frobenius_norm().max(1.0);
    if split.n() != agent.n() || split.reconstruction_error(agent.a()) > 1e-8 * scale {
        return Err(Error::InvalidArgument("modal split does not belong to this agent".into()));
    }
    build(agent, split, agent.kind())
}

/// ‖gain(split_a) − gain(split_b)‖_F for two splits of the same A.
pub fn basis_invariance_check(
    agent: &LinearAgent,
    split_a: &ModalDecomposition,
    split_b: &ModalDecomposition,
) -> Result<f64> {
    let ga = synthesize_with_split(agent, split_a.clone())?;
    let gb = synthesize_with_split(agent, split_b.clone())?;
    Ok((ga.gain.as_dmatrix() - gb.gain.as_dmatrix()).norm())
}

/// Axis tolerance used when classifying the agent's spectrum.
pub fn agent_axis_tolerance(agent: &LinearAgent) -> f64 {
    axis_tolerance(agent.a().as_dmatrix())
}
