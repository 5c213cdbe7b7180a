use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netsync_cli::commands::{cmd_check, cmd_simulate, cmd_sweep, cmd_synth, fmt_f64, write_check};
use netsync_cli::config::SweepParam;
use netsync_cli::{CliError, ScenarioConfig};

const DEFAULT_OUT: &str = "netsync-out";

/// Synchronizing gains for networks of identical linear agents.
///
/// Exit codes: 0 success, 1 config error, 2 assumption violation,
/// 3 runtime or integration failure.
#[derive(Parser)]
#[command(name = "netsync", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `outputs` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Replaces every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the gain and write synth.toml.
    Synth(Common),
    /// Synthesize, simulate, write trajectory.csv and summary.toml.
    Simulate(Common),
    /// One simulate per value of p, seed or density; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to sweep (p, seed or density); overrides [sweep].
        #[arg(long)]
        param: Option<SweepParam>,
        /// Comma-separated values; overrides [sweep].
        #[arg(long)]
        values: Option<String>,
    },
    /// Report every assumption and the network facts.
    Check(Common),
}

fn load(common: &Common) -> Result<(ScenarioConfig, PathBuf), CliError> {
    let mut config = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.override_seed(seed);
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.outputs.clone())
        .unwrap_or_else(|| Path::new(DEFAULT_OUT).to_path_buf());
    Ok((config, out))
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Config(format!("sweep value `{s}` is not a number")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(common) => {
            let (config, out) = load(&common)?;
            let report = cmd_synth(&config, &out)?;
            println!(
                "n1 = {}, n2 = {}, residuals pass = {}, report {}",
                report.n1,
                report.n2,
                report.residuals.pass,
                out.join("synth.toml").display()
            );
        }
        Command::Simulate(common) => {
            let (config, out) = load(&common)?;
            let s = cmd_simulate(&config, &out)?;
            println!(
                "delta = {}, final sync_error = {}, pass = {}, summary {}",
                fmt_f64(s.delta),
                fmt_f64(s.final_sync_error),
                s.pass,
                out.join("summary.toml").display()
            );
        }
        Command::Sweep { common, param, values } => {
            let (config, out) = load(&common)?;
            let from_config = config.sweep.clone();
            let param = param
                .or(from_config.as_ref().map(|s| s.param))
                .ok_or_else(|| CliError::Config("sweep needs --param or a [sweep] section".into()))?;
            let values = match values {
                Some(text) => parse_values(&text)?,
                None => from_config.map(|s| s.values).unwrap_or_default(),
            };
            let rows = cmd_sweep(&config, param, &values, &out, common.workers)?;
            let passed = rows.iter().filter(|r| r.pass).count();
            println!("{passed}/{} members pass, table {}", rows.len(), out.join("sweep.csv").display());
        }
        Command::Check(common) => {
            let (config, out) = load(&common)?;
            let report = cmd_check(&config)?;
            print!("{}", write_check(&report, &out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
