//! Stacked closed-loop dynamics `I_p⊗A + Γ⊗M`, time integration, the
//! synchronization reference `(rᵀ⊗e^{At})x(0)` and error metrics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{axis_tolerance, expm_dense, spd_power, spectrum_dense, RealMatrix};
use crate::network::NetworkTopology;
use crate::synthesis::{GainKind, GainSynthesis, LinearAgent};

/// Largest stacked dimension that is assembled densely.
pub const DENSE_LIMIT: usize = 2000;
/// rk4 requires dt·‖stacked‖_F ≤ RK4_GUARD.
pub const RK4_GUARD: f64 = 0.5;
/// Reference modes must match spectrum(A) within this, relative to max(1, ‖A‖_F).
pub const MODE_MATCH_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Steps by the precomputed exponential e^{stacked·dt}.
    ExactExpm,
    /// Classical fixed-step Runge–Kutta.
    Rk4,
}

/// p identical agents ẋ_i = A x_i + M Σ_j γ_ij (x_j − x_i).
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    a: RealMatrix,
    coupling: RealMatrix,
    topology: NetworkTopology,
    kind: Option<GainKind>,
    stacked: Option<RealMatrix>,
}

impl CoupledSystem {
    /// Assembles `I_p⊗A + Γ⊗M` for an arbitrary coupling matrix M.
    pub fn from_parts(a: RealMatrix, coupling: RealMatrix, topology: NetworkTopology) -> Result<Self> {
        let n = a.ensure_square("A")?;
        if coupling.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "coupling matrix is {:?}, expected ({n}, {n})",
                coupling.shape()
            )));
        }
        let p = topology.p();
        let stacked = if p * n <= DENSE_LIMIT {
            let ip = RealMatrix::identity(p);
            Some(&ip.kron(&a) + &topology.gamma().kron(&coupling))
        } else {
            None
        };
        Ok(CoupledSystem {
            a,
            coupling,
            topology,
            kind: None,
            stacked,
        })
    }

    pub fn p(&self) -> usize {
        self.topology.p()
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn dim(&self) -> usize {
        self.p() * self.n()
    }

    pub fn a(&self) -> &RealMatrix {
        &self.a
    }

    /// M = LC or BK.
    pub fn coupling(&self) -> &RealMatrix {
        &self.coupling
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn kind(&self) -> Option<GainKind> {
        self.kind
    }

    /// Dense stacked matrix, absent above [`DENSE_LIMIT`].
    pub fn stacked(&self) -> Option<&RealMatrix> {
        self.stacked.as_ref()
    }

    fn require_stacked(&self) -> Result<&DMatrix<f64>> {
        self.stacked.as_ref().map(RealMatrix::as_dmatrix).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "stacked dimension {} exceeds the dense limit {DENSE_LIMIT}",
                self.dim()
            ))
        })
    }

    /// Frobenius norm of the stacked matrix, or an upper bound from the
    /// factors when it is not assembled.
    pub fn stacked_norm(&self) -> f64 {
        match &self.stacked {
            Some(s) => s.frobenius_norm(),
            None => {
                (self.p() as f64).sqrt() * self.a.frobenius_norm()
                    + self.topology.gamma().frobenius_norm() * self.coupling.frobenius_norm()
            }
        }
    }

    /// stacked·x, using the factors when the dense matrix is not formed.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        if let Some(s) = &self.stacked {
            return s.as_dmatrix() * x;
        }
        let (p, n) = (self.p(), self.n());
        let a = self.a.as_dmatrix();
        let m = self.coupling.as_dmatrix();
        let g = self.topology.gamma().as_dmatrix();
        let mut out = DVector::zeros(p * n);
        let mut mixed = DVector::zeros(n);
        for i in 0..p {
            mixed.fill(0.0);
            for j in 0..p {
                let w = g[(i, j)];
                if w != 0.0 {
                    mixed.axpy(w, &x.rows(j * n, n), 1.0);
                }
            }
            let block = a * x.rows(i * n, n) + m * &mixed;
            out.rows_mut(i * n, n).copy_from(&block);
        }
        out
    }

    /// r-weighted average Σ r_i x_i.
    pub fn weighted_average(&self, x: &[f64]) -> Result<DVector<f64>> {
        let r = self.topology.require_r()?;
        weighted_average(r, self.n(), x)
    }

    /// x̄(t) = e^{At} Σ r_i x_i(0).
    pub fn reference_at(&self, x0: &[f64], t: f64) -> Result<DVector<f64>> {
        let avg = self.weighted_average(x0)?;
        Ok(expm_dense(&(self.a.as_dmatrix() * t)) * avg)
    }
}

fn weighted_average(r: &[f64], n: usize, x: &[f64]) -> Result<DVector<f64>> {
    if x.len() != r.len() * n {
        return Err(Error::DimensionMismatch(format!(
            "stacked state has length {}, expected {}",
            x.len(),
            r.len() * n
        )));
    }
    let mut avg = DVector::zeros(n);
    for (i, ri) in r.iter().enumerate() {
        avg.axpy(*ri, &DVector::from_column_slice(&x[i * n..(i + 1) * n]), 1.0);
    }
    Ok(avg)
}

/// Builds the closed loop for a synthesized gain.
pub fn assemble(agent: &LinearAgent, gain: &GainSynthesis, topology: &NetworkTopology) -> Result<CoupledSystem> {
    let expected = match gain.kind {
        GainKind::OutputFeedback => (agent.n(), agent.m()),
        GainKind::StateFeedback => (agent.m(), agent.n()),
    };
    if gain.kind != agent.kind() {
        return Err(Error::KindMismatch(format!(
            "{:?} gain for a {:?} agent",
            gain.kind,
            agent.kind()
        )));
    }
    if gain.gain.shape() != expected {
        return Err(Error::DimensionMismatch(format!(
            "gain is {:?}, expected {expected:?}",
            gain.gain.shape()
        )));
    }
    let coupling = gain.coupling_matrix(agent)?;
    let mut system = CoupledSystem::from_parts(agent.a().clone(), coupling, topology.clone())?;
    system.kind = Some(gain.kind);
    Ok(system)
}

/// (rᵀ⊗e^{At})·x0.
pub fn reference_trajectory(agent: &LinearAgent, topology: &NetworkTopology, x0: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and non-negative, got {t}")));
    }
    let avg = weighted_average(topology.require_r()?, agent.n(), x0)?;
    Ok((expm_dense(&(agent.a().as_dmatrix() * t)) * avg).as_slice().to_vec())
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub times: Vec<f64>,
    /// One stacked state (length pn) per grid point.
    pub states: Vec<Vec<f64>>,
    /// x̄(t) per grid point (length n).
    pub reference: Vec<Vec<f64>>,
    /// max_i ‖x_i − x̄‖₂
    pub sync_error: Vec<f64>,
    /// max_{i,j} ‖x_i − x_j‖₂
    pub disagreement: Vec<f64>,
    pub method: Method,
    /// The uniform step actually used (T divided into whole steps).
    pub step: f64,
}

impl SimulationRun {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_sync_error(&self) -> f64 {
        *self.sync_error.last().expect("runs hold at least the initial point")
    }
}

/// max_i ‖x_i − x̄‖₂ and max_{i,j} ‖x_i − x_j‖₂.
pub fn sync_metrics(state: &[f64], reference: &[f64], n: usize) -> (f64, f64) {
    let p = state.len() / n.max(1);
    let agent = |i: usize| &state[i * n..(i + 1) * n];
    let dist = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let sync = (0..p).map(|i| dist(agent(i), reference)).fold(0.0, f64::max);
    let mut spread: f64 = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            spread = spread.max(dist(agent(i), agent(j)));
        }
    }
    (sync, spread)
}

/// Integrates the closed loop from `x0` over [0, horizon] on a uniform grid
/// whose step is the largest value ≤ `dt` dividing the horizon.
pub fn simulate(system: &CoupledSystem, x0: &[f64], horizon: f64, dt: f64, method: Method) -> Result<SimulationRun> {
    if x0.len() != system.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            system.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    if !(horizon > 0.0 && horizon.is_finite() && dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon and step must be positive and finite (T = {horizon}, dt = {dt})"
        )));
    }
    if dt > horizon {
        return Err(Error::InvalidArgument(format!("step {dt} exceeds horizon {horizon}")));
    }
    let steps = ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    if method == Method::Rk4 && h * system.stacked_norm() > RK4_GUARD {
        return Err(Error::StepSizeGuard(format!(
            "dt·‖stacked‖ = {:e} exceeds {RK4_GUARD}",
            h * system.stacked_norm()
        )));
    }

    let n = system.n();
    let avg = system.weighted_average(x0)?;
    let a = system.a.as_dmatrix();
    let propagator = match method {
        Method::ExactExpm => Some(expm_dense(&(system.require_stacked()? * h))),
        Method::Rk4 => None,
    };

    let mut run = SimulationRun {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        reference: Vec::with_capacity(steps + 1),
        sync_error: Vec::with_capacity(steps + 1),
        disagreement: Vec::with_capacity(steps + 1),
        method,
        step: h,
    };
    let mut x = DVector::from_column_slice(x0);
    for k in 0..=steps {
        if k > 0 {
            x = match &propagator {
                Some(e) => e * &x,
                None => rk4_step(system, &x, h),
            };
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged(k));
            }
        }
        let t = if k == steps { horizon } else { k as f64 * h };
        let reference = expm_dense(&(a * t)) * &avg;
        let state: Vec<f64> = if k == 0 { x0.to_vec() } else { x.as_slice().to_vec() };
        let (sync, spread) = sync_metrics(&state, reference.as_slice(), n);
        run.times.push(t);
        run.states.push(state);
        run.reference.push(reference.as_slice().to_vec());
        run.sync_error.push(sync);
        run.disagreement.push(spread);
    }
    Ok(run)
}

fn rk4_step(system: &CoupledSystem, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = system.apply(x);
    let k2 = system.apply(&(x + &k1 * (h / 2.0)));
    let k3 = system.apply(&(x + &k2 * (h / 2.0)));
    let k4 = system.apply(&(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Modal-coordinate diagnostics per grid point.
#[derive(Debug, Clone)]
pub struct ModalError {
    /// max_{i,j} ‖ξ_i − ξ_j‖₂
    pub xi_disagreement: Vec<f64>,
    /// max_i ‖η_i‖₂ (0 when the Hurwitz block is empty)
    pub eta_norm: Vec<f64>,
}

/// ξ_i = P^{1/2}U†x_i and η_i = W†x_i.
pub fn modal_coordinates(gain: &GainSynthesis, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = &gain.decomposition;
    if x.len() != d.n() {
        return Err(Error::DimensionMismatch(format!("agent state has length {}, expected {}", x.len(), d.n())));
    }
    let x = DVector::from_column_slice(x);
    let xi = gain.p_sqrt.as_dmatrix() * (d.u_dag.as_dmatrix() * &x);
    let eta = d.w_dag.as_dmatrix() * &x;
    Ok((xi.as_slice().to_vec(), eta.as_slice().to_vec()))
}

/// Inverse of [`modal_coordinates`]: x_i = U P^{-1/2} ξ_i + W η_i.
pub fn from_modal_coordinates(gain: &GainSynthesis, xi: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
    let d = &gain.decomposition;
    if xi.len() != d.n1 || eta.len() != d.n2 {
        return Err(Error::DimensionMismatch("modal coordinate lengths do not match the split".into()));
    }
    let mut x = d.w.as_dmatrix() * DVector::from_column_slice(eta);
    if d.n1 > 0 {
        let p_inv_sqrt = spd_power(gain.p.as_dmatrix(), -0.5)?;
        x += d.u.as_dmatrix() * (p_inv_sqrt * DVector::from_column_slice(xi));
    }
    Ok(x.as_slice().to_vec())
}

/// Per-time ξ disagreement and η magnitude for a run of `system`.
pub fn modal_error(system: &CoupledSystem, gain: &GainSynthesis, run: &SimulationRun) -> Result<ModalError> {
    let n = system.n();
    let gain_fits = match gain.kind {
        GainKind::OutputFeedback => gain.gain.rows() == n,
        GainKind::StateFeedback => gain.gain.cols() == n,
    };
    if !gain_fits || gain.decomposition.n() != n {
        return Err(Error::InvalidArgument("gain does not belong to this system".into()));
    }
    if system.kind.is_some_and(|k| k != gain.kind) {
        return Err(Error::InvalidArgument("gain kind differs from the system's".into()));
    }
    // Same A is a necessary condition for shared provenance.
    let scale = system.a.frobenius_norm().max(1.0);
    if gain.decomposition.reconstruction_error(&system.a) > 1e-8 * scale {
        return Err(Error::InvalidArgument("gain was synthesized for a different A".into()));
    }

    let p = system.p();
    let mut out = ModalError {
        xi_disagreement: Vec::with_capacity(run.len()),
        eta_norm: Vec::with_capacity(run.len()),
    };
    for state in &run.states {
        let mut xis = Vec::with_capacity(p);
        let mut eta_max: f64 = 0.0;
        for i in 0..p {
            let (xi, eta) = modal_coordinates(gain, &state[i * n..(i + 1) * n])?;
            eta_max = eta_max.max(eta.iter().map(|v| v * v).sum::<f64>().sqrt());
            xis.push(xi);
        }
        let mut spread: f64 = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                let d: f64 = xis[i].iter().zip(&xis[j]).map(|(a, b)| (a - b).powi(2)).sum();
                spread = spread.max(d.sqrt());
            }
        }
        out.xi_disagreement.push(spread);
        out.eta_norm.push(eta_max);
    }
    Ok(out)
}

/// Spectral view of the closed loop, split into the synchronization modes
/// (the 𝟙⊗ℝⁿ direction, whose eigenvalues are those of A) and the
/// disagreement modes (the invariant subspace ker(rᵀ⊗I_n)).
#[derive(Debug, Clone)]
pub struct SpectralCheck {
    /// Eigenvalues of the stacked matrix matched one-to-one to spectrum(A).
    pub reference_modes: Vec<Complex64>,
    /// Largest distance in that matching.
    pub reference_mismatch: f64,
    /// Eigenvalues of the disagreement block (pn − n of them).
    pub disagreement_modes: Vec<Complex64>,
    /// −max Re over the disagreement modes (+∞ when p = 1).
    pub delta: f64,
    /// True when every disagreement mode is strictly in the left half-plane.
    pub decaying: bool,
}

impl SpectralCheck {
    /// 60/δ, the horizon used for synchronization assertions.
    pub fn assertion_horizon(&self) -> Option<f64> {
        (self.decaying && self.delta.is_finite()).then(|| 60.0 / self.delta)
    }

    pub fn reference_matched(&self, a_norm: f64) -> bool {
        self.reference_mismatch <= MODE_MATCH_REL * a_norm.max(1.0)
    }
}

/// Orthonormal basis (p × (p−1)) of the complement of r.
fn complement_basis(r: &[f64]) -> DMatrix<f64> {
    let p = r.len();
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v: DVector<f64> = DVector::from_column_slice(r) / norm;
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let vv = v.dot(&v);
    let householder = DMatrix::identity(p, p) - (&v * v.transpose()) * (2.0 / vv);
    householder.columns(1, p - 1).into_owned()
}

pub fn spectral_check(system: &CoupledSystem) -> Result<SpectralCheck> {
    let stacked = system.require_stacked()?;
    let r = system.topology.require_r()?;
    let (p, n) = (system.p(), system.n());

    let full = spectrum_dense(stacked)?.eigenvalues;
    let reference = spectrum_dense(system.a.as_dmatrix())?.eigenvalues;
    let mut used = vec![false; full.len()];
    let mut reference_modes = Vec::with_capacity(n);
    let mut mismatch: f64 = 0.0;
    for lambda in &reference {
        let best = (0..full.len())
            .filter(|&k| !used[k])
            .min_by(|&x, &y| (full[x] - lambda).norm().total_cmp(&(full[y] - lambda).norm()));
        if let Some(k) = best {
            used[k] = true;
            mismatch = mismatch.max((full[k] - lambda).norm());
            reference_modes.push(full[k]);
        }
    }

    if p == 1 {
        return Ok(SpectralCheck {
            reference_modes,
            reference_mismatch: mismatch,
            disagreement_modes: Vec::new(),
            delta: f64::INFINITY,
            decaying: true,
        });
    }
    let z = complement_basis(r).kronecker(&DMatrix::<f64>::identity(n, n));
    let block = z.transpose() * stacked * &z;
    let disagreement_modes = spectrum_dense(&block)?.eigenvalues;
    let abscissa = disagreement_modes.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let delta = -abscissa;
    Ok(SpectralCheck {
        reference_modes,
        reference_mismatch: mismatch,
        disagreement_modes,
        delta,
        decaying: delta > axis_tolerance(stacked),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate_topology;
    use crate::synthesis::synthesize_output_gain;

    fn m(rows: &[&[f64]]) -> RealMatrix {
        RealMatrix::from_rows(rows).unwrap()
    }

    fn rot() -> RealMatrix {
        m(&[&[0.0, 1.0], &[-1.0, 0.0]])
    }

    fn pair() -> NetworkTopology {
        validate_topology(&m(&[&[-1.0, 1.0], &[1.0, -1.0]])).unwrap()
    }

    fn oscillator() -> (LinearAgent, GainSynthesis) {
        let agent = LinearAgent::output_coupled(rot(), m(&[&[0.0, 1.0]])).unwrap();
        let gain = synthesize_output_gain(&agent).unwrap();
        (agent, gain)
    }

    #[test]
    fn single_agent_stacked_is_a() {
        let (agent, gain) = oscillator();
        let lone = validate_topology(&RealMatrix::zeros(1, 1)).unwrap();
        let sys = assemble(&agent, &gain, &lone).unwrap();
        assert_eq!(sys.stacked().unwrap(), agent.a());
        let check = spectral_check(&sys).unwrap();
        assert!(check.decaying && check.disagreement_modes.is_empty());
        assert!(check.reference_matched(1.0));
    }

    #[test]
    fn oscillator_pair_by_hand() {
        let (agent, gain) = oscillator();
        let sys = assemble(&agent, &gain, &pair()).unwrap();
        #[rustfmt::skip]
        let want = DMatrix::from_row_slice(4, 4, &[
            0.0, 1.0, 0.0, 0.0,
            -1.0, -1.0, 0.0, 1.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 1.0, -1.0, -1.0,
        ]);
        assert!((sys.stacked().unwrap().as_dmatrix() - want).amax() < 1e-12);
        let check = spectral_check(&sys).unwrap();
        assert!(check.reference_matched(1.0));
        assert_eq!(check.disagreement_modes.len(), 2);
        // Disagreement block is [[0, 1], [−1, −2]]: double eigenvalue −1.
        assert!((check.delta - 1.0).abs() < 1e-6);
        assert!(check.decaying);
    }

    #[test]
    fn zero_coupling_is_block_diagonal_and_not_decaying() {
        let sys = CoupledSystem::from_parts(rot(), RealMatrix::zeros(2, 2), pair()).unwrap();
        let ip = RealMatrix::identity(2);
        assert_eq!(sys.stacked().unwrap(), &ip.kron(&rot()));
        let check = spectral_check(&sys).unwrap();
        assert!(!check.decaying);
        assert!(check.delta.abs() < 1e-9);
    }

    #[test]
    fn factored_apply_matches_dense() {
        let (agent, gain) = oscillator();
        let ring = validate_topology(&m(&[&[-1.0, 1.0, 0.0], &[0.0, -2.0, 2.0], &[0.5, 0.0, -0.5]])).unwrap();
        let mut sys = assemble(&agent, &gain, &ring).unwrap();
        let x = DVector::from_fn(6, |i, _| (i as f64 * 0.7).sin());
        let dense = sys.apply(&x);
        sys.stacked = None;
        let factored = sys.apply(&x);
        assert!((dense - factored).amax() < 1e-14);
    }

    #[test]
    fn reference_examples() {
        let integrator = LinearAgent::output_coupled(RealMatrix::zeros(1, 1), m(&[&[1.0]])).unwrap();
        for t in [0.0, 1.0, 50.0] {
            let x = reference_trajectory(&integrator, &pair(), &[1.0, 3.0], t).unwrap();
            assert!((x[0] - 2.0).abs() < 1e-15);
        }
        let (agent, _) = oscillator();
        let rooted = validate_topology(&m(&[&[0.0, 0.0], &[1.0, -1.0]])).unwrap();
        for t in [0.0, 0.3, 2.0, 10.0] {
            let x = reference_trajectory(&agent, &rooted, &[1.0, 0.0, 5.0, 5.0], t).unwrap();
            assert!((x[0] - t.cos()).abs() < 1e-13 && (x[1] + t.sin()).abs() < 1e-13);
        }
        assert!(reference_trajectory(&agent, &rooted, &[1.0, 0.0, 5.0], 0.0).is_err());
    }

    #[test]
    fn zero_gain_integrators_stay_put() {
        let sys = CoupledSystem::from_parts(RealMatrix::zeros(1, 1), RealMatrix::zeros(1, 1), pair()).unwrap();
        for method in [Method::ExactExpm, Method::Rk4] {
            let run = simulate(&sys, &[1.0, 3.0], 5.0, 0.25, method).unwrap();
            assert_eq!(run.len(), 21);
            for (s, d) in run.states.iter().zip(&run.disagreement) {
                assert_eq!(s, &vec![1.0, 3.0]);
                assert_eq!(*d, 2.0);
            }
        }
    }

    #[test]
    fn run_invariants() {
        let (agent, gain) = oscillator();
        let sys = assemble(&agent, &gain, &pair()).unwrap();
        let x0 = [0.3, -1.0, 0.8, 0.1];
        let run = simulate(&sys, &x0, 3.0, 0.07, Method::ExactExpm).unwrap();
        assert_eq!(run.states[0], x0.to_vec());
        assert_eq!(*run.times.last().unwrap(), 3.0);
        assert!(run.step <= 0.07);
        for (s, d) in run.sync_error.iter().zip(&run.disagreement) {
            assert!(*s >= 0.0 && *d <= 2.0 * s + 1e-15);
        }
    }

    #[test]
    fn simulate_errors() {
        let (agent, gain) = oscillator();
        let sys = assemble(&agent, &gain, &pair()).unwrap();
        let x0 = [0.0; 4];
        assert!(matches!(simulate(&sys, &x0, 1.0, 2.0, Method::ExactExpm), Err(Error::InvalidArgument(_))));
        assert!(matches!(simulate(&sys, &x0, 1.0, 0.5, Method::Rk4), Err(Error::StepSizeGuard(_))));
        assert!(simulate(&sys, &x0[..3], 1.0, 0.1, Method::ExactExpm).is_err());
        assert!(simulate(&sys, &x0, -1.0, 0.1, Method::ExactExpm).is_err());
        let unstable = CoupledSystem::from_parts(
            RealMatrix::from_diagonal(&[400.0]).unwrap(),
            RealMatrix::zeros(1, 1),
            validate_topology(&RealMatrix::zeros(1, 1)).unwrap(),
        )
        .unwrap();
        assert!(matches!(simulate(&unstable, &[1.0], 10.0, 1.0, Method::ExactExpm), Err(Error::Diverged(_))));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let (_, gain) = oscillator();
        let state_agent = LinearAgent::state_coupled(rot(), m(&[&[0.0], &[1.0]])).unwrap();
        assert!(matches!(assemble(&state_agent, &gain, &pair()), Err(Error::KindMismatch(_))));
    }

    #[test]
    fn modal_roundtrip_and_empty_eta() {
        let (agent, gain) = oscillator();
        let sys = assemble(&agent, &gain, &pair()).unwrap();
        let run = simulate(&sys, &[0.3, -1.0, 0.8, 0.1], 2.0, 0.1, Method::ExactExpm).unwrap();
        let me = modal_error(&sys, &gain, &run).unwrap();
        assert!(me.eta_norm.iter().all(|v| *v == 0.0));
        for state in &run.states {
            for i in 0..2 {
                let x = &state[2 * i..2 * i + 2];
                let (xi, eta) = modal_coordinates(&gain, x).unwrap();
                let back = from_modal_coordinates(&gain, &xi, &eta).unwrap();
                for (u, v) in back.iter().zip(x) {
                    assert!((u - v).abs() < 1e-10);
                }
            }
        }
    }
}
