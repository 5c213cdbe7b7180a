//! Coupling matrices: validation, connectivity, the left stationary vector
//! and the Lyapunov certificate for `Γ − 𝟙rᵀ`.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::svd::Svd;
use crate::linalg::{expm_dense, solve_lyapunov, spectrum_dense, RealMatrix};

/// Row-sum and sign tolerance relative to max(1, ‖Γ‖_F).
pub const ROW_REL: f64 = 1e-8;
/// Certificate residuals must stay below this, relative to max(1, ‖P‖_F).
pub const CERTIFICATE_REL: f64 = 1e-8;

/// A validated coupling matrix Γ.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    gamma: RealMatrix,
    r: Option<Vec<f64>>,
    connected: bool,
}

impl NetworkTopology {
    pub fn p(&self) -> usize {
        self.gamma.rows()
    }

    pub fn gamma(&self) -> &RealMatrix {
        &self.gamma
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Left stationary vector; `None` for disconnected topologies.
    pub fn r(&self) -> Option<&[f64]> {
        self.r.as_deref()
    }

    /// The stationary vector, or [`Error::NotConnected`].
    pub fn require_r(&self) -> Result<&[f64]> {
        self.r.as_deref().ok_or(Error::NotConnected)
    }

    pub fn require_connected(&self) -> Result<&Self> {
        if self.connected {
            Ok(self)
        } else {
            Err(Error::NotConnected)
        }
    }

    /// 𝟙rᵀ as a dense matrix.
    pub fn consensus_projector(&self) -> Result<RealMatrix> {
        let r = self.require_r()?;
        let p = self.p();
        RealMatrix::from_dmatrix(DMatrix::from_fn(p, p, |_, j| r[j]))
    }

    /// −max Re λ over the nonzero eigenvalues of Γ (`None` when p = 1).
    pub fn spectral_gap(&self) -> Result<Option<f64>> {
        self.require_connected()?;
        let eig = spectrum_dense(self.gamma.as_dmatrix())?.eigenvalues;
        if eig.len() <= 1 {
            return Ok(None);
        }
        let zero = eig
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let abscissa = eig
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != zero)
            .map(|(_, z)| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Some(-abscissa))
    }
}

/// Checks the sign and row-sum conditions, projects rows to an exact zero
/// sum through the diagonal and decides connectivity.
///
/// A disconnected Γ is returned with `is_connected() == false`; callers that
/// need a connected network use [`NetworkTopology::require_connected`].
pub fn validate_topology(gamma_raw: &RealMatrix) -> Result<NetworkTopology> {
    let p = gamma_raw.rows();
    if !gamma_raw.is_square() || p == 0 {
        return Err(Error::InvalidTopology(format!(
            "coupling matrix must be square and non-empty, got {}x{}",
            gamma_raw.rows(),
            gamma_raw.cols()
        )));
    }
    let tol = ROW_REL * gamma_raw.frobenius_norm().max(1.0);
    let mut g = gamma_raw.as_dmatrix().clone();
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            if g[(i, j)] < -tol {
                return Err(Error::InvalidTopology(format!(
                    "negative off-diagonal entry {} at ({i}, {j})",
                    g[(i, j)]
                )));
            }
            if g[(i, j)] < 0.0 {
                g[(i, j)] = 0.0;
            }
        }
        let sum: f64 = g.row(i).iter().sum();
        if sum.abs() > tol {
            return Err(Error::InvalidTopology(format!("row {i} sums to {sum:e}, not 0")));
        }
        let off: f64 = (0..p).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
        g[(i, i)] = -off;
        // Nudge the diagonal until the row sums to zero in evaluation order.
        for _ in 0..4 {
            let residual: f64 = g.row(i).iter().sum();
            if residual == 0.0 {
                break;
            }
            g[(i, i)] -= residual;
        }
    }

    let connected = has_global_sink(&g);
    let r = if connected { Some(stationary_dense(&g)?) } else { None };
    Ok(NetworkTopology {
        gamma: RealMatrix::from_dmatrix(g)?,
        r,
        connected,
    })
}

/// True iff some node is reachable from every other node, with an arc
/// i → j wherever γ_ij > 0.
fn has_global_sink(g: &DMatrix<f64>) -> bool {
    let p = g.nrows();
    (0..p).any(|root| {
        let mut seen = vec![false; p];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for i in 0..p {
                if !seen[i] && i != v && g[(i, v)] > 0.0 {
                    seen[i] = true;
                    count += 1;
                    queue.push_back(i);
                }
            }
        }
        count == p
    })
}

fn stationary_dense(g: &DMatrix<f64>) -> Result<Vec<f64>> {
    let p = g.nrows();
    if p == 1 {
        return Ok(vec![1.0]);
    }
    let svd = Svd::real(&g.transpose())?;
    let mut r: Vec<f64> = svd.v.column(p - 1).iter().map(|z| z.re).collect();
    let total: f64 = r.iter().sum();
    if total.abs() < 1e-12 {
        return Err(Error::EigenFailure("left null vector of Γ sums to zero".into()));
    }
    for v in &mut r {
        *v /= total;
    }
    // Put the normalization residual on the largest entry.
    let residual = 1.0 - r.iter().sum::<f64>();
    if let Some(k) = (0..p).max_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs())) {
        r[k] += residual;
    }
    Ok(r)
}

/// Left stationary vector r with rᵀΓ = 0 and rᵀ𝟙 = 1.
pub fn stationary_vector(topology: &NetworkTopology) -> Result<Vec<f64>> {
    topology.require_r().map(<[f64]>::to_vec)
}

/// ‖e^{Γt} − 𝟙rᵀ‖_F.
pub fn ergodic_limit_check(topology: &NetworkTopology, t: f64) -> Result<f64> {
    let projector = topology.consensus_projector()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and non-negative, got {t}")));
    }
    let e = expm_dense(&(topology.gamma.as_dmatrix() * t));
    Ok((e - projector.as_dmatrix()).norm())
}

/// Quadratic certificate for the disagreement dynamics of Γ.
#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    /// Solves (Γ − 𝟙rᵀ)ᵀP + P(Γ − 𝟙rᵀ) = −Q.
    pub p_cert: RealMatrix,
    /// Always the identity.
    pub q_cert: RealMatrix,
    /// (I − 𝟙rᵀ)ᵀ P (I − 𝟙rᵀ).
    pub p_hat: RealMatrix,
    /// (I − 𝟙rᵀ)ᵀ Q (I − 𝟙rᵀ).
    pub q_hat: RealMatrix,
}

impl LyapunovCertificate {
    /// ‖(Γ−𝟙rᵀ)ᵀP + P(Γ−𝟙rᵀ) + Q‖_F.
    pub fn shifted_residual(&self, topology: &NetworkTopology) -> Result<f64> {
        let shifted = topology.gamma().as_dmatrix() - topology.consensus_projector()?.as_dmatrix();
        let p = self.p_cert.as_dmatrix();
        Ok((shifted.transpose() * p + p * &shifted + self.q_cert.as_dmatrix()).norm())
    }

    /// ‖ΓᵀP̂ + P̂Γ + Q̂‖_F.
    pub fn projected_residual(&self, topology: &NetworkTopology) -> f64 {
        let g = topology.gamma().as_dmatrix();
        let ph = self.p_hat.as_dmatrix();
        (g.transpose() * ph + ph * g + self.q_hat.as_dmatrix()).norm()
    }
}

pub fn lyapunov_certificate(topology: &NetworkTopology) -> Result<LyapunovCertificate> {
    let p = topology.p();
    let projector = topology.consensus_projector()?;
    let shifted = topology.gamma() - &projector;
    let q_cert = RealMatrix::identity(p);
    let p_cert = solve_lyapunov(&shifted, &q_cert)?;

    let complement = &RealMatrix::identity(p) - &projector;
    let sandwich = |m: &RealMatrix| &(&complement.transpose() * m) * &complement;
    let cert = LyapunovCertificate {
        p_hat: sandwich(&p_cert),
        q_hat: sandwich(&q_cert),
        p_cert,
        q_cert,
    };

    let scale = cert.p_cert.frobenius_norm().max(1.0);
    let r1 = cert.shifted_residual(topology)?;
    let r2 = cert.projected_residual(topology);
    if r1.max(r2) > CERTIFICATE_REL * scale {
        return Err(Error::SingularEquation(format!(
            "certificate residuals {r1:e}, {r2:e} exceed tolerance"
        )));
    }
    let lmin = cert.p_cert.as_dmatrix().clone().symmetric_eigenvalues().min();
    if lmin <= 0.0 {
        return Err(Error::SingularEquation(format!(
            "certificate is not positive definite (λ_min = {lmin:e})"
        )));
    }
    Ok(cert)
}

/// Random connected coupling matrix, deterministic in `seed`.
///
/// A random spanning arborescence toward a random root guarantees a global
/// sink; every other ordered pair gets an arc with probability `density`.
/// Weights are uniform in (0, 2].
pub fn random_connected_topology(p: usize, density: f64, seed: u64) -> Result<NetworkTopology> {
    if p == 0 {
        return Err(Error::InvalidArgument("agent count must be at least 1".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!("density must lie in (0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DMatrix::<f64>::zeros(p, p);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    for k in 1..p {
        let parent = order[rng.random_range(0..k)];
        g[(order[k], parent)] = weight(&mut rng);
    }
    for i in 0..p {
        for j in 0..p {
            if i != j && g[(i, j)] == 0.0 && rng.random_bool(density) {
                g[(i, j)] = weight(&mut rng);
            }
        }
    }
    for i in 0..p {
        let off: f64 = g.row(i).iter().sum();
        g[(i, i)] = -off;
    }
    let topology = validate_topology(&RealMatrix::from_dmatrix(g)?)?;
    debug_assert!(topology.is_connected());
    Ok(topology)
}

pub(crate) fn weight<R: Rng>(rng: &mut R) -> f64 {
    2.0 * (1.0 - rng.random::<f64>())
}
