//! Seeded generators for agents, skew-symmetric test systems, initial
//! conditions and disconnected coupling matrices.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{is_detectable, RealMatrix};
use crate::network::{random_connected_topology, validate_topology, weight, NetworkTopology};
use crate::synthesis::{GainKind, LinearAgent};

/// Largest agent dimension produced by [`random_agent`].
pub const MAX_AGENT_DIM: usize = 6;
const MAX_SIMILARITY_COND: f64 = 50.0;
const MIN_FREQ_GAP: f64 = 0.1;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

/// Uniform entries in [−scale, scale].
pub fn random_initial_state(len: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..len).map(|_| scale * rng.random_range(-1.0..=1.0)).collect()
}

enum Block {
    Rotation(f64),
    Integrator,
    Decay(f64),
    Spiral(f64, f64),
}

fn draw_frequency<R: Rng>(rng: &mut R, used: &mut Vec<f64>) -> f64 {
    loop {
        let w: f64 = rng.random_range(0.3..3.0);
        if used.iter().all(|u| (u - w).abs() >= MIN_FREQ_GAP) {
            used.push(w);
            return w;
        }
    }
}

/// Block-diagonal neutrally stable matrix with distinct eigenvalues.
fn random_neutral_core<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut blocks = Vec::new();
    let mut size = 0;
    let mut freqs = Vec::new();
    let mut has_integrator = false;
    while size < n {
        let room = n - size;
        let choice = rng.random_range(0..4);
        let block = match choice {
            0 if room >= 2 => Block::Rotation(draw_frequency(rng, &mut freqs)),
            1 if !has_integrator => {
                has_integrator = true;
                Block::Integrator
            }
            2 if room >= 2 => Block::Spiral(rng.random_range(0.2..2.0), draw_frequency(rng, &mut freqs)),
            _ => Block::Decay(rng.random_range(0.2..3.0)),
        };
        size += if matches!(block, Block::Rotation(_) | Block::Spiral(..)) { 2 } else { 1 };
        blocks.push(block);
    }
    let mut a = DMatrix::zeros(n, n);
    let mut at = 0;
    for block in blocks {
        match block {
            Block::Rotation(w) => {
                // Skew-similar: diag(d, 1)·ω·rot·diag(1/d, 1).
                let d: f64 = rng.random_range(0.5..2.0);
                a[(at, at + 1)] = w * d;
                a[(at + 1, at)] = -w / d;
                at += 2;
            }
            Block::Spiral(sigma, w) => {
                a[(at, at)] = -sigma;
                a[(at + 1, at + 1)] = -sigma;
                a[(at, at + 1)] = w;
                a[(at + 1, at)] = -w;
                at += 2;
            }
            Block::Integrator => at += 1,
            Block::Decay(s) => {
                a[(at, at)] = -s;
                at += 1;
            }
        }
    }
    a
}

fn random_similarity<R: Rng>(rng: &mut R, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    loop {
        let t = DMatrix::identity(n, n) + uniform_matrix(rng, n, n) * (0.5 / (n as f64).sqrt());
        let sv = t.singular_values();
        if sv.min() > 0.0 && sv.max() / sv.min() <= MAX_SIMILARITY_COND {
            let inv = t.clone().try_inverse().expect("well-conditioned similarity is invertible");
            return (t, inv);
        }
    }
}

/// A random neutrally stable agent of dimension ≤ 6 with a mix of marginal
/// and Hurwitz modes, conjugated by a well-conditioned similarity. The
/// output (or input) matrix is resampled until detectability (or
/// stabilizability) holds.
pub fn random_agent(seed: u64, kind: GainKind) -> Result<LinearAgent> {
    let mut rng = rng(seed);
    let n = rng.random_range(1..=MAX_AGENT_DIM);
    let core = random_neutral_core(&mut rng, n);
    let (t, t_inv) = random_similarity(&mut rng, n);
    let a = RealMatrix::from_dmatrix(&t * core * t_inv)?;
    let m = rng.random_range(1..=n.min(3));
    for _ in 0..100 {
        let io = RealMatrix::from_dmatrix(uniform_matrix(&mut rng, m, n))?;
        let agent = match kind {
            GainKind::OutputFeedback => LinearAgent::output_coupled(a.clone(), io),
            GainKind::StateFeedback => LinearAgent::state_coupled(a.clone(), io.transpose()),
        };
        match agent {
            Ok(agent) => return Ok(agent),
            Err(Error::AssumptionViolated { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidArgument(format!("no admissible input/output matrix for seed {seed}")))
}

/// Random skew-symmetric S (n ≤ 6) and H with (H, S) observable.
pub fn random_skew_pair(seed: u64) -> Result<(RealMatrix, RealMatrix)> {
    let mut rng = rng(seed);
    let n = rng.random_range(1..=MAX_AGENT_DIM);
    let x = uniform_matrix(&mut rng, n, n) * 1.5;
    let s = RealMatrix::from_dmatrix(&x - x.transpose())?;
    let m = rng.random_range(1..=2.min(n));
    for _ in 0..100 {
        let h = RealMatrix::from_dmatrix(uniform_matrix(&mut rng, m, n))?;
        if is_detectable(&h, &s)? {
            return Ok((s, h));
        }
    }
    Err(Error::InvalidArgument(format!("no observable output for seed {seed}")))
}

/// A coupling matrix on p ≥ 2 nodes with no globally reachable node: either
/// two components without arcs between them, or two nodes with no outgoing
/// arcs.
pub fn random_disconnected_topology(p: usize, density: f64, seed: u64) -> Result<NetworkTopology> {
    if p < 2 {
        return Err(Error::InvalidArgument("a disconnected network needs at least two nodes".into()));
    }
    let mut rng = rng(seed);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut g = DMatrix::<f64>::zeros(p, p);
    if rng.random_bool(0.5) {
        let split = rng.random_range(1..p);
        let (first, second) = order.split_at(split);
        for part in [first, second] {
            let sub = random_connected_topology(part.len(), density, rng.random())?;
            for (a, &i) in part.iter().enumerate() {
                for (b, &j) in part.iter().enumerate() {
                    g[(i, j)] = sub.gamma().get(a, b);
                }
            }
        }
    } else {
        let sinks = [order[0], order[1]];
        for i in 0..p {
            if sinks.contains(&i) {
                continue;
            }
            for j in 0..p {
                if i != j && rng.random_bool(density) {
                    g[(i, j)] = weight(&mut rng);
                }
            }
            let off: f64 = g.row(i).iter().sum();
            g[(i, i)] = -off;
        }
    }
    validate_topology(&RealMatrix::from_dmatrix(g)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_neutrally_stable, is_skew_symmetric};

    #[test]
    fn agents_are_admissible_and_deterministic() {
        for seed in 0..20 {
            for kind in [GainKind::OutputFeedback, GainKind::StateFeedback] {
                let a = random_agent(seed, kind).unwrap();
                assert!(a.n() <= MAX_AGENT_DIM);
                assert!(is_neutrally_stable(a.a()).unwrap());
                let b = random_agent(seed, kind).unwrap();
                assert_eq!(a.a(), b.a());
            }
        }
    }

    #[test]
    fn skew_pairs_are_observable() {
        for seed in 0..20 {
            let (s, h) = random_skew_pair(seed).unwrap();
            assert!(is_skew_symmetric(&s, 0.0).unwrap());
            assert!(is_detectable(&h, &s).unwrap());
        }
    }

    #[test]
    fn disconnected_generator() {
        for seed in 0..20 {
            let t = random_disconnected_topology(2 + (seed as usize % 6), 0.5, seed).unwrap();
            assert!(!t.is_connected());
        }
        assert!(random_disconnected_topology(1, 0.5, 0).is_err());
    }

    #[test]
    fn initial_state_range() {
        let x = random_initial_state(50, 2.0, 1);
        assert!(x.iter().all(|v| v.abs() <= 2.0));
        assert_eq!(x, random_initial_state(50, 2.0, 1));
    }
}
