//! Scenario files: a TOML document describing one agent, one network, an
//! initial condition and the integration settings.
//!
//! ```toml
//! problem = "output-coupling"
//! horizon = 20.0
//! step = 0.01
//! method = "exact-expm"
//! outputs = "out"
//!
//! [agent]
//! a = [[0.0, 1.0], [-1.0, 0.0]]
//! c = [[0.0, 1.0]]
//!
//! [topology]            # either gamma = [[...]] or p/density/seed
//! p = 3
//! density = 0.5
//! seed = 7
//!
//! [x0.random]           # or [x0] values = [...]
//! seed = 1
//! scale = 1.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use netsync::network::{random_connected_topology, validate_topology, NetworkTopology};
use netsync::random::random_initial_state;
use netsync::simulator::Method;
use netsync::synthesis::{GainKind, LinearAgent};
use netsync::RealMatrix;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    OutputCoupling,
    StateCoupling,
}

impl Problem {
    pub fn kind(self) -> GainKind {
        match self {
            Problem::OutputCoupling => GainKind::OutputFeedback,
            Problem::StateCoupling => GainKind::StateFeedback,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    ExactExpm,
    Rk4,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Method {
        match m {
            MethodName::ExactExpm => Method::ExactExpm,
            MethodName::Rk4 => Method::Rk4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub a: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
}

/// Inline Γ, or the seeded generator {p, density, seed}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomState {
    pub seed: u64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    P,
    Seed,
    Density,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "p" => Ok(SweepParam::P),
            "seed" => Ok(SweepParam::Seed),
            "density" => Ok(SweepParam::Density),
            other => Err(format!("unknown sweep parameter `{other}` (expected p, seed or density)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub problem: Problem,
    pub horizon: f64,
    pub step: f64,
    #[serde(default = "default_method")]
    pub method: MethodName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    pub agent: AgentConfig,
    pub topology: TopologyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn default_method() -> MethodName {
    MethodName::ExactExpm
}

/// The agent's matrices, checked for shape but not for the assumptions.
#[derive(Debug, Clone)]
pub struct RawAgent {
    pub a: RealMatrix,
    pub io: RealMatrix,
    pub problem: Problem,
}

impl RawAgent {
    /// Builds the agent, enforcing neutral stability and detectability
    /// (or stabilizability).
    pub fn admit(&self) -> netsync::Result<LinearAgent> {
        match self.problem {
            Problem::OutputCoupling => LinearAgent::output_coupled(self.a.clone(), self.io.clone()),
            Problem::StateCoupling => LinearAgent::state_coupled(self.a.clone(), self.io.clone()),
        }
    }
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<RealMatrix, CliError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::Config(format!("{name} must be a non-empty nested array")));
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(CliError::Config(format!("{name} has rows of different lengths")));
    }
    RealMatrix::from_rows(rows).map_err(|e| CliError::Config(format!("{name}: {e}")))
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Structural checks that need no numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |msg: &str| Err(CliError::Config(msg.to_string()));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return cfg("horizon must be positive and finite");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return cfg("step must be positive and finite");
        }
        if self.step > self.horizon {
            return cfg("step must not exceed the horizon");
        }
        match (self.problem, &self.agent.c, &self.agent.b) {
            (Problem::OutputCoupling, Some(_), None) | (Problem::StateCoupling, None, Some(_)) => {}
            (Problem::OutputCoupling, _, _) => return cfg("output-coupling needs agent.c and no agent.b"),
            (Problem::StateCoupling, _, _) => return cfg("state-coupling needs agent.b and no agent.c"),
        }
        let t = &self.topology;
        let generator = [t.p.is_some(), t.density.is_some(), t.seed.is_some()];
        match (&t.gamma, generator) {
            (Some(_), [false, false, false]) | (None, [true, true, true]) => {}
            _ => return cfg("topology needs either gamma or all of p, density and seed"),
        }
        if let Some(d) = t.density {
            if !(d > 0.0 && d <= 1.0) {
                return cfg("topology.density must lie in (0, 1]");
            }
        }
        if t.p == Some(0) {
            return cfg("topology.p must be at least 1");
        }
        match &self.x0 {
            Some(InitialState { values: Some(_), random: None }) => {}
            Some(InitialState { values: None, random: Some(r) }) => {
                if !(r.scale >= 0.0 && r.scale.is_finite()) {
                    return cfg("x0.random.scale must be finite and non-negative");
                }
            }
            _ => return cfg("x0 needs either values or random"),
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return cfg("sweep values must not be empty");
            }
        }
        Ok(())
    }

    pub fn agent(&self) -> Result<RawAgent, CliError> {
        let a = matrix("agent.a", &self.agent.a)?;
        if !a.is_square() {
            return Err(CliError::Config(format!("agent.a must be square, got {:?}", a.shape())));
        }
        let io = match self.problem {
            Problem::OutputCoupling => matrix("agent.c", self.agent.c.as_deref().unwrap_or_default())?,
            Problem::StateCoupling => matrix("agent.b", self.agent.b.as_deref().unwrap_or_default())?,
        };
        let fits = match self.problem {
            Problem::OutputCoupling => io.cols() == a.rows(),
            Problem::StateCoupling => io.rows() == a.rows(),
        };
        if !fits {
            return Err(CliError::Config(format!(
                "agent input/output matrix {:?} does not fit A {:?}",
                io.shape(),
                a.shape()
            )));
        }
        Ok(RawAgent {
            a,
            io,
            problem: self.problem,
        })
    }

    /// The validated Γ; disconnected networks are returned, not rejected.
    pub fn topology(&self) -> Result<NetworkTopology, CliError> {
        let t = &self.topology;
        let result = match (&t.gamma, t.p, t.density, t.seed) {
            (Some(g), ..) => validate_topology(&matrix("topology.gamma", g)?),
            (None, Some(p), Some(density), Some(seed)) => random_connected_topology(p, density, seed),
            _ => return Err(CliError::Config("topology source is incomplete".into())),
        };
        result.map_err(|e| CliError::Config(format!("topology: {e}")))
    }

    pub fn initial_state(&self, p: usize, n: usize) -> Result<Vec<f64>, CliError> {
        let x0 = match &self.x0 {
            Some(InitialState { values: Some(v), .. }) => v.clone(),
            Some(InitialState { random: Some(r), .. }) => random_initial_state(p * n, r.scale, r.seed),
            _ => return Err(CliError::Config("x0 source is missing".into())),
        };
        if x0.len() != p * n {
            return Err(CliError::Config(format!(
                "x0 has {} entries, expected p·n = {}",
                x0.len(),
                p * n
            )));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config("x0 contains non-finite values".into()));
        }
        Ok(x0)
    }

    /// Replaces every seed (topology generator and random x0).
    pub fn override_seed(&mut self, seed: u64) {
        if self.topology.seed.is_some() {
            self.topology.seed = Some(seed);
        }
        if let Some(InitialState { random: Some(r), .. }) = &mut self.x0 {
            r.seed = seed;
        }
    }

    /// The member config for one sweep value.
    pub fn with_sweep_value(&self, param: SweepParam, value: f64) -> Result<Self, CliError> {
        let mut member = self.clone();
        member.sweep = None;
        let whole = |what: &str| -> Result<u64, CliError> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64 {
                Ok(value as u64)
            } else {
                Err(CliError::Config(format!("{what} sweep values must be non-negative integers, got {value}")))
            }
        };
        match param {
            SweepParam::P => {
                if member.topology.gamma.is_some() {
                    return Err(CliError::Config("sweeping p needs a generated topology".into()));
                }
                if !matches!(member.x0, Some(InitialState { random: Some(_), .. })) {
                    return Err(CliError::Config("sweeping p needs a random x0".into()));
                }
                member.topology.p = Some(whole("p")? as usize);
            }
            SweepParam::Seed => member.override_seed(whole("seed")?),
            SweepParam::Density => {
                if member.topology.gamma.is_some() {
                    return Err(CliError::Config("sweeping density needs a generated topology".into()));
                }
                member.topology.density = Some(value);
            }
        }
        member.validate()?;
        Ok(member)
    }
}
