//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{emit, load_scenario, write_atomic};
use crate::observer::{ball_radius, build_t};
use crate::sim::{gamma_comparison, q_sweep, run, trajectory_comparison, RunMetrics, ScenarioConfig, Seeds};

#[derive(Debug, Parser)]
#[command(name = "seaobs", version, about = "Vessel disturbance observer simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Base seed for all random streams.
    #[arg(long, global = true, env = "OBSERVER_SEED")]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Dotted-path override, e.g. `gains=[18,18,18]` or `environment.noise_enabled=true`.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Run filter and observer every n-th plant step.
    #[arg(long, global = true)]
    pub decimation: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario from a config or manifest file.
    Run { config: PathBuf },
    /// Run a built-in scenario.
    Preset { name: Preset },
    /// Check a configuration without simulating it.
    Validate { config: PathBuf },
    /// Print the derived observer design for a configuration (defaults if omitted).
    Derive { config: Option<PathBuf> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full environment, model and measurement noise.
    SevereTable3,
    /// Process-noise sweep over four covariance scales.
    QSweepFig6,
    /// Equal decaying disturbances under five gain levels.
    GammaFig8,
    /// Trajectories with and without model noise.
    TrajectoryFig1,
    /// The severe scenario with stochastic disturbances.
    StochasticFig5,
}

pub const Q_SWEEP_SCALES: [f64; 4] = [1e3, 1e4, 3e4, 1e5];
pub const GAMMA_LEVELS: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 30.0];

impl Preset {
    pub fn dir_name(self) -> &'static str {
        match self {
            Preset::SevereTable3 => "severe-table3",
            Preset::QSweepFig6 => "q-sweep-fig6",
            Preset::GammaFig8 => "gamma-fig8",
            Preset::TrajectoryFig1 => "trajectory-fig1",
            Preset::StochasticFig5 => "stochastic-fig5",
        }
    }

    pub fn config(self) -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        if self == Preset::StochasticFig5 {
            c.environment.noise_enabled = true;
        }
        c
    }
}

fn apply_flags(cli: &Cli, mut cfg: ScenarioConfig) -> Result<ScenarioConfig> {
    for o in &cli.overrides {
        cfg = cfg.with_override(o)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seeds = Seeds::from_base(seed);
    }
    if let Some(n) = cli.decimation {
        cfg.measurement_decimation = n;
    }
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
}

fn summary(m: &RunMetrics) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "records            {}", m.records);
    let _ = writeln!(
        s,
        "mean |z_r|         {} {} {}",
        fmt_opt(m.mean_abs_relative_error[0]),
        fmt_opt(m.mean_abs_relative_error[1]),
        fmt_opt(m.mean_abs_relative_error[2])
    );
    let _ = writeln!(
        s,
        "rmse measured      {:.6} {:.6} {:.6}",
        m.rmse_measured[0], m.rmse_measured[1], m.rmse_measured[2]
    );
    let _ = writeln!(
        s,
        "rmse filtered      {:.6} {:.6} {:.6}",
        m.rmse_filtered[0], m.rmse_filtered[1], m.rmse_filtered[2]
    );
    let _ = writeln!(s, "theta              {:.3}", m.theta);
    let _ = write!(s, "ball radius        {}", fmt_opt(m.ball_radius));
    s
}

fn run_one(cfg: &ScenarioConfig, dir: &Path, out: &mut impl Write) -> Result<RunMetrics> {
    let start = Instant::now();
    let output = run(cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    emit(dir, cfg, &output, elapsed)?;
    writeln!(out, "{}\n{}", dir.display(), summary(&output.metrics))?;
    Ok(output.metrics)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

#[derive(Serialize)]
struct SweepSummary {
    scale: f64,
    dir: String,
    metrics: RunMetrics,
}

#[derive(Serialize)]
struct GammaSummary {
    gamma: f64,
    dir: String,
    time_to_half: [Option<f64>; 3],
    weak_gain: bool,
}

#[derive(Serialize)]
struct TrajectorySummary {
    terminal_separation: f64,
}

fn run_preset(cli: &Cli, preset: Preset, out: &mut impl Write) -> Result<()> {
    let cfg = apply_flags(cli, preset.config())?;
    let root = cli.out.join(preset.dir_name());
    match preset {
        Preset::SevereTable3 | Preset::StochasticFig5 => {
            run_one(&cfg, &root, out)?;
        }
        Preset::QSweepFig6 => {
            let mut rows = Vec::new();
            for entry in q_sweep(&cfg, &Q_SWEEP_SCALES)? {
                let name = format!("q-{}", entry.scale);
                let mut c = cfg.clone();
                c.noise.process_cov = nalgebra::Matrix3::identity() * entry.scale;
                emit(&root.join(&name), &c, &entry.output, 0.0)?;
                writeln!(out, "{name}\n{}", summary(&entry.output.metrics))?;
                rows.push(SweepSummary {
                    scale: entry.scale,
                    dir: name,
                    metrics: entry.output.metrics,
                });
            }
            write_json(&root.join("summary.json"), &rows)?;
        }
        Preset::GammaFig8 => {
            let mut rows = Vec::new();
            for entry in gamma_comparison(&cfg, &GAMMA_LEVELS)? {
                let name = format!("gamma-{}", entry.gamma);
                let c = crate::sim::gamma_scenario(&cfg, entry.gamma);
                emit(&root.join(&name), &c, &entry.output, 0.0)?;
                writeln!(
                    out,
                    "gamma {:>6}  time to half error {}{}",
                    entry.gamma,
                    fmt_opt(entry.time_to_half[0]),
                    if entry.weak_gain {
                        "  (gain below the ball-bound margin)"
                    } else {
                        ""
                    }
                )?;
                rows.push(GammaSummary {
                    gamma: entry.gamma,
                    dir: name,
                    time_to_half: entry.time_to_half,
                    weak_gain: entry.weak_gain,
                });
            }
            write_json(&root.join("summary.json"), &rows)?;
        }
        Preset::TrajectoryFig1 => {
            let cmp = trajectory_comparison(&cfg)?;
            let mut clean = cfg.clone();
            clean.noise.process_cov = nalgebra::Matrix3::zeros();
            emit(&root.join("with-noise"), &cfg, &cmp.with_noise, 0.0)?;
            emit(&root.join("without-noise"), &clean, &cmp.without_noise, 0.0)?;
            writeln!(out, "terminal separation {:.3} m", cmp.terminal_separation)?;
            write_json(
                &root.join("summary.json"),
                &TrajectorySummary {
                    terminal_separation: cmp.terminal_separation,
                },
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Derived {
    kappa: crate::vessel::InverseMass,
    sigma: f64,
    t: [[f64; 3]; 3],
    theta: f64,
    ball_radius: Option<f64>,
}

fn derive(cfg: &ScenarioConfig) -> Result<String> {
    let report = cfg.validate()?;
    let (_, sigma) = build_t(&cfg.gains, &report.inverse_mass)?;
    let d = Derived {
        kappa: report.inverse_mass,
        sigma,
        t: report.t,
        theta: report.theta_at_initial_heading,
        ball_radius: ball_radius(&cfg.gains, sigma, report.theta_at_initial_heading).ok(),
    };
    Ok(serde_json::to_string_pretty(&d)?)
}

/// Executes a parsed command line, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut impl Write) -> Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = apply_flags(cli, load_scenario(config)?)?;
            run_one(&cfg, &cli.out, out)?;
        }
        Command::Preset { name } => run_preset(cli, *name, out)?,
        Command::Validate { config } => {
            let cfg = apply_flags(cli, load_scenario(config)?)?;
            let report = cfg.validate()?;
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            if !report.ok() {
                return Err(Error::Config(report.errors.join("; ")));
            }
        }
        Command::Derive { config } => {
            let base = match config {
                Some(p) => load_scenario(p)?,
                None => ScenarioConfig::default(),
            };
            let cfg = apply_flags(cli, base)?;
            writeln!(out, "{}", derive(&cfg)?)?;
        }
    }
    Ok(())
}

/// Parses `args`, runs, and maps failures to exit codes 1 (input) and 2 (numerics).
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
