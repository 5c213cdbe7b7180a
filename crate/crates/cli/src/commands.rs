use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use netsync::linalg::{is_detectable, is_neutrally_stable, is_stabilizable};
use netsync::network::{ergodic_limit_check, lyapunov_certificate};
use netsync::simulator::{assemble, simulate, spectral_check, Method, SimulationRun};
use netsync::synthesis::{synthesize_output_gain, synthesize_state_gain, GainSynthesis, LinearAgent, INVARIANT_REL};
use netsync::{Assumption, RealMatrix};

use crate::config::{InitialState, Problem, ScenarioConfig, SweepParam};
use crate::error::CliError;

pub const TRAJECTORY_HEADER: &str = "t, agent, state_index, value, ref_value, sync_error, disagreement";
pub const SWEEP_HEADER: &str = "value, delta, final_sync_error, runtime, pass, error";
/// sync_error(T*) must be at most SYNC_REL·(1 + sync_error(0)).
pub const SYNC_REL: f64 = 1e-4;
/// With one agent the error must vanish to this, relative to 1 + ‖x0‖.
const SINGLE_AGENT_REL: f64 = 1e-9;
/// Grid points used for the propagation to T*.
const T_STAR_STEPS: f64 = 200.0;

/// Shortest text that parses back to the same f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<String, CliError> {
    let text = toml::to_string(value).map_err(|e| CliError::Runtime(format!("cannot serialize report: {e}")))?;
    fs::write(path, &text)?;
    Ok(text)
}

fn synthesize(agent: &LinearAgent, problem: Problem) -> Result<GainSynthesis, CliError> {
    let gain = match problem {
        Problem::OutputCoupling => synthesize_output_gain(agent),
        Problem::StateCoupling => synthesize_state_gain(agent),
    };
    Ok(gain?)
}

#[derive(Debug, Serialize)]
pub struct ResidualReport {
    pub commutation: f64,
    pub skew: f64,
    pub h_mismatch: f64,
    pub gain_mismatch: f64,
    pub pair_ok: bool,
    /// Absolute bound each residual is compared against.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct SynthReport {
    pub problem: Problem,
    pub n: usize,
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub gain_is_zero: bool,
    pub gain: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub residuals: ResidualReport,
}

fn synth_report(agent: &LinearAgent, problem: Problem, gain: &GainSynthesis) -> Result<SynthReport, CliError> {
    let r = gain.residuals(agent)?;
    let tolerance = INVARIANT_REL * gain.decomposition.f.frobenius_norm().max(1.0) * r.p_norm.max(1.0);
    let pass = r.commutation <= tolerance
        && r.skew <= tolerance
        && r.h_mismatch <= tolerance
        && r.gain_mismatch <= tolerance
        && r.pair_ok;
    Ok(SynthReport {
        problem,
        n: agent.n(),
        m: agent.m(),
        n1: gain.decomposition.n1,
        n2: gain.decomposition.n2,
        gain_is_zero: gain.gain.max_abs() == 0.0,
        gain: rows(&gain.gain),
        p: rows(&gain.p),
        s: rows(&gain.s),
        h: rows(&gain.h),
        residuals: ResidualReport {
            commutation: r.commutation,
            skew: r.skew,
            h_mismatch: r.h_mismatch,
            gain_mismatch: r.gain_mismatch,
            pair_ok: r.pair_ok,
            tolerance,
            pass,
        },
    })
}

/// Writes `synth.toml`; fails with exit 3 if any residual is out of tolerance.
pub fn cmd_synth(config: &ScenarioConfig, out: &Path) -> Result<SynthReport, CliError> {
    let agent = config.agent()?.admit()?;
    let gain = synthesize(&agent, config.problem)?;
    let report = synth_report(&agent, config.problem, &gain)?;
    fs::create_dir_all(out)?;
    write_toml(&out.join("synth.toml"), &report)?;
    if !report.residuals.pass {
        return Err(CliError::Runtime("synthesis residuals exceed tolerance".into()));
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub problem: Problem,
    pub p: usize,
    pub n: usize,
    pub method: String,
    pub horizon: f64,
    pub step: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    pub initial_sync_error: f64,
    pub final_sync_error: f64,
    /// sync_error at T*, or the largest error along the run when p = 1.
    pub checked_sync_error: f64,
    pub bound: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0_seed: Option<u64>,
    pub r: Vec<f64>,
    pub gain: Vec<Vec<f64>>,
    pub trajectory: String,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::ExactExpm => "exact-expm",
        Method::Rk4 => "rk4",
    }
}

/// Synthesizes, simulates over the configured horizon, writes
/// `trajectory.csv` and `summary.toml`, and judges synchronization at T*.
pub fn cmd_simulate(config: &ScenarioConfig, out: &Path) -> Result<SimulateSummary, CliError> {
    let raw = config.agent()?;
    let topology = config.topology()?;
    let x0 = config.initial_state(topology.p(), raw.a.rows())?;
    let agent = raw.admit()?;
    topology.require_connected()?;
    let gain = synthesize(&agent, config.problem)?;
    let system = assemble(&agent, &gain, &topology)?;
    let method: Method = config.method.into();
    let run = simulate(&system, &x0, config.horizon, config.step, method)?;

    let check = spectral_check(&system)?;
    let initial = run.sync_error[0];
    let bound = SYNC_REL * (1.0 + initial);
    let (t_star, checked, bound, pass) = if topology.p() == 1 {
        let x0_norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let worst = run.sync_error.iter().copied().fold(0.0, f64::max);
        let bound = SINGLE_AGENT_REL * (1.0 + x0_norm);
        (None, worst, bound, worst <= bound)
    } else {
        match check.assertion_horizon() {
            Some(t_star) => {
                let long = simulate(&system, &x0, t_star, t_star / T_STAR_STEPS, Method::ExactExpm)?;
                let e = long.final_sync_error();
                (Some(t_star), e, bound, e <= bound)
            }
            None => (None, f64::INFINITY, bound, false),
        }
    };

    fs::create_dir_all(out)?;
    write_trajectory(&out.join("trajectory.csv"), &run, system.p(), system.n())?;
    let summary = SimulateSummary {
        problem: config.problem,
        p: system.p(),
        n: system.n(),
        method: method_name(method).to_string(),
        horizon: config.horizon,
        step: run.step,
        delta: check.delta,
        t_star,
        initial_sync_error: initial,
        final_sync_error: run.final_sync_error(),
        checked_sync_error: checked,
        bound,
        pass,
        topology_seed: config.topology.seed,
        x0_seed: match &config.x0 {
            Some(InitialState { random: Some(r), .. }) => Some(r.seed),
            _ => None,
        },
        r: topology.r().map(<[f64]>::to_vec).unwrap_or_default(),
        gain: rows(&gain.gain),
        trajectory: "trajectory.csv".into(),
    };
    write_toml(&out.join("summary.toml"), &summary)?;
    Ok(summary)
}

/// Long-format trajectory: one row per (t, agent, state_index).
pub fn write_trajectory(path: &Path, run: &SimulationRun, p: usize, n: usize) -> Result<(), CliError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for k in 0..run.len() {
        let t = fmt_f64(run.times[k]);
        let sync = fmt_f64(run.sync_error[k]);
        let spread = fmt_f64(run.disagreement[k]);
        for agent in 0..p {
            for j in 0..n {
                writeln!(
                    w,
                    "{t}, {agent}, {j}, {}, {}, {sync}, {spread}",
                    fmt_f64(run.states[k][agent * n + j]),
                    fmt_f64(run.reference[k][j]),
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub delta: Option<f64>,
    pub final_sync_error: Option<f64>,
    pub runtime: f64,
    pub pass: bool,
    pub error: Option<String>,
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Runs one simulate per value in parallel, each into `member-NNN/`, then
/// writes `sweep.csv`. Member failures become rows, not errors.
pub fn cmd_sweep(
    config: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    out: &Path,
    workers: usize,
) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep values must not be empty".into()));
    }
    let members: Vec<ScenarioConfig> = values
        .iter()
        .map(|v| config.with_sweep_value(param, *v))
        .collect::<Result<_, _>>()?;
    fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        members
            .par_iter()
            .zip(values.par_iter())
            .enumerate()
            .map(|(i, (member, value))| {
                let dir: PathBuf = out.join(format!("member-{i:03}"));
                let start = Instant::now();
                let result = cmd_simulate(member, &dir);
                let runtime = start.elapsed().as_secs_f64();
                match result {
                    Ok(s) => SweepRow {
                        value: *value,
                        delta: Some(s.delta),
                        final_sync_error: Some(s.final_sync_error),
                        runtime,
                        pass: s.pass,
                        error: None,
                    },
                    Err(e) => SweepRow {
                        value: *value,
                        delta: None,
                        final_sync_error: None,
                        runtime,
                        pass: false,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });

    let mut w = BufWriter::new(fs::File::create(out.join("sweep.csv"))?);
    writeln!(w, "{SWEEP_HEADER}")?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for row in &rows {
        writeln!(
            w,
            "{}, {}, {}, {}, {}, {}",
            fmt_f64(row.value),
            opt(row.delta),
            opt(row.final_sync_error),
            fmt_f64(row.runtime),
            row.pass,
            csv_field(row.error.as_deref().unwrap_or("")),
        )?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub description: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub problem: Problem,
    pub all_pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_shifted_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_projected_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ergodic_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ergodic_residual: Option<f64>,
    pub checks: Vec<CheckItem>,
}

fn item(assumption: Assumption, outcome: netsync::Result<bool>) -> CheckItem {
    let (pass, detail) = match outcome {
        Ok(pass) => (pass, String::new()),
        Err(e) => (false, e.to_string()),
    };
    CheckItem {
        name: assumption.to_string(),
        description: assumption.describe().to_string(),
        pass,
        detail,
    }
}

/// Reports every assumption and the network facts. Failed checks are part
/// of the report, not errors.
pub fn cmd_check(config: &ScenarioConfig) -> Result<CheckReport, CliError> {
    let raw = config.agent()?;
    let topology = config.topology()?;
    let mut checks = Vec::new();
    match config.problem {
        Problem::OutputCoupling => {
            checks.push(item(Assumption::A1, is_neutrally_stable(&raw.a)));
            checks.push(item(Assumption::A2, is_detectable(&raw.io, &raw.a)));
        }
        Problem::StateCoupling => {
            checks.push(item(Assumption::B1, is_neutrally_stable(&raw.a)));
            checks.push(item(Assumption::B2, is_stabilizable(&raw.a, &raw.io)));
        }
    }
    checks.push(item(Assumption::Connectivity, Ok(topology.is_connected())));

    let mut report = CheckReport {
        problem: config.problem,
        all_pass: false,
        r: topology.r().map(<[f64]>::to_vec),
        certificate_shifted_residual: None,
        certificate_projected_residual: None,
        spectral_gap: None,
        ergodic_time: None,
        ergodic_residual: None,
        checks,
    };
    if topology.is_connected() {
        match lyapunov_certificate(&topology) {
            Ok(cert) => {
                report.certificate_shifted_residual = cert.shifted_residual(&topology).ok();
                report.certificate_projected_residual = Some(cert.projected_residual(&topology));
            }
            Err(e) => report.checks.push(CheckItem {
                name: "certificate".into(),
                description: "Lyapunov certificate for Γ − 𝟙rᵀ".into(),
                pass: false,
                detail: e.to_string(),
            }),
        }
        if let Ok(Some(gap)) = topology.spectral_gap() {
            let t = 60.0 / gap;
            report.spectral_gap = Some(gap);
            report.ergodic_time = Some(t);
            report.ergodic_residual = ergodic_limit_check(&topology, t).ok();
        }
    }
    report.all_pass = report.checks.iter().all(|c| c.pass);
    Ok(report)
}

/// Writes the check report to `check.toml` and returns its text.
pub fn write_check(report: &CheckReport, out: &Path) -> Result<String, CliError> {
    fs::create_dir_all(out)?;
    write_toml(&out.join("check.toml"), report)
}
