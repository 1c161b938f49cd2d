//! Command-line front end: `simulate` and `check-obedience`.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{config_digest, load_config, resolved_toml};
use crate::dynamics::simulate;
use crate::equilibrium::{check_obedience, ObedienceReport};
use crate::error::{Error, Result};
use crate::estimators::envelope_series;
use crate::export::write_trajectory_csv;
use crate::model::{EstimatorKind, GameConfig, Scenario};

/// Environment variable that sets the output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "SIGNAL_ROUTING_OUT";
const DEFAULT_OUT_DIR: &str = "runs";

#[derive(Debug, Parser)]
#[command(
    name = "signal-routing",
    version,
    about = "Repeated routing game with partial signaling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the repeated game and write one trajectory CSV per seed.
    Simulate(SimulateArgs),
    /// Check the obedience condition for the configured signal.
    /// Exit status: 0 obedient, 2 not obedient, 1 error.
    CheckObedience(ObedienceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Number of rounds (overrides the config file).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub rounds: Option<u64>,
    /// Seed; repeat for a sweep (overrides the config file).
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// baseline | discounted=LAMBDA | dynamic-nu
    #[arg(long)]
    pub scenario: Option<ScenarioArg>,
    /// smoothing | luenberger=L
    #[arg(long)]
    pub estimator: Option<EstimatorArg>,
    /// Output directory (default: $SIGNAL_ROUTING_OUT, then ./runs).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append the forecast-error envelope columns e_lower, e_upper.
    #[arg(long)]
    pub emit_envelope: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ObedienceArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioArg(pub Scenario);

impl FromStr for ScenarioArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once('=') {
            None if s == "baseline" => Ok(Self(Scenario::Baseline)),
            None if s == "dynamic-nu" => Ok(Self(Scenario::DynamicNu)),
            Some(("discounted", v)) => v
                .parse::<f64>()
                .map(|lambda| Self(Scenario::Discounted { lambda }))
                .map_err(|e| format!("bad discount factor {v:?}: {e}")),
            _ => Err(format!(
                "unknown scenario {s:?}; expected baseline, discounted=LAMBDA or dynamic-nu"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorArg {
    Smoothing,
    /// Same gain on every link.
    Luenberger(f64),
}

impl FromStr for EstimatorArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once('=') {
            None if s == "smoothing" => Ok(Self::Smoothing),
            None if s == "luenberger" => Ok(Self::Luenberger(0.0)),
            Some(("luenberger", v)) => v
                .parse::<f64>()
                .map(Self::Luenberger)
                .map_err(|e| format!("bad observer gain {v:?}: {e}")),
            _ => Err(format!(
                "unknown estimator {s:?}; expected smoothing or luenberger=L"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub seed: u64,
    pub csv: PathBuf,
    pub rounds: usize,
    pub wall_clock_secs: f64,
}

/// Provenance record written next to the trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub artifact_version: String,
    pub resolved_config: PathBuf,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunEntry>,
}

fn apply_overrides(mut cfg: GameConfig, args: &SimulateArgs) -> Result<GameConfig> {
    if let Some(k) = args.rounds {
        cfg.rounds = k as usize;
    }
    if let Some(ScenarioArg(s)) = args.scenario {
        cfg.scenario = s;
    }
    match args.estimator {
        Some(EstimatorArg::Smoothing) => cfg.estimator = EstimatorKind::Smoothing,
        Some(EstimatorArg::Luenberger(l)) => {
            if l != 0.0 {
                log::warn!("observer gain {l} != 0: stability is not analyzed");
            }
            cfg.estimator = EstimatorKind::Luenberger {
                gain: vec![l; cfg.n_links()],
            }
        }
        None => {}
    }
    if cfg.rounds == 0 {
        return Err(Error::config("rounds must be positive"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(args: &SimulateArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn run_one(cfg: &GameConfig, seed: u64, path: &Path, emit_envelope: bool) -> Result<RunEntry> {
    let started = Instant::now();
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    let trajectory = simulate(&cfg)?;
    let envelope = if emit_envelope {
        let e1 = trajectory.first().map_or(0.0, |r| r.e_theta);
        Some(envelope_series(
            trajectory.len(),
            e1,
            cfg.beta_min,
            &cfg.beta_schedule,
        ))
    } else {
        None
    };
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trajectory_csv(file, cfg.latency.states(), &trajectory, envelope.as_deref())?;
    Ok(RunEntry {
        seed,
        csv: path.to_path_buf(),
        rounds: trajectory.len(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Runs every requested seed (in parallel) and writes CSVs, the resolved
/// config and `manifest.json` into the output directory.
pub fn run_simulate(args: &SimulateArgs) -> Result<RunManifest> {
    let cfg = apply_overrides(load_config(&args.config)?, args)?;
    if args.emit_envelope && !matches!(cfg.estimator, EstimatorKind::Smoothing) {
        return Err(Error::config(
            "the forecast-error envelope only applies to the smoothing estimator",
        ));
    }
    let out = output_dir(args);
    std::fs::create_dir_all(&out)?;

    let seeds = if args.seeds.is_empty() {
        vec![cfg.seed]
    } else {
        args.seeds.clone()
    };
    let paths: Vec<PathBuf> = seeds
        .iter()
        .enumerate()
        .map(|(i, s)| out.join(format!("trajectory_{i:03}_seed{s}.csv")))
        .collect();

    let results: Vec<Result<RunEntry>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .zip(&paths)
            .map(|(&seed, path)| {
                let cfg = &cfg;
                scope.spawn(move || run_one(cfg, seed, path, args.emit_envelope))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let resolved_path = out.join("resolved_config.toml");
    std::fs::write(&resolved_path, resolved_toml(&cfg))?;
    let manifest = RunManifest {
        config_digest: config_digest(&cfg),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        resolved_config: resolved_path,
        seeds,
        runs,
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn run_check_obedience(args: &ObedienceArgs) -> Result<ObedienceReport> {
    let cfg = load_config(&args.config)?;
    check_obedience(&cfg, args.tol)
}

fn print_report(report: &ObedienceReport) {
    println!(
        "obedient: {} (witness {}, tol {:e})",
        report.obedient, report.witness, report.tol
    );
    println!("y(0) = {:?}", report.y0.y);
    println!("worst obedience slack: {:e}", report.worst_obedience_slack);
    println!("worst nash slack:      {:e}", report.worst_nash_slack);
}

/// Dispatches a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Simulate(args) => match run_simulate(&args) {
            Ok(manifest) => {
                for run in &manifest.runs {
                    println!("seed {}: {}", run.seed, run.csv.display());
                }
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::CheckObedience(args) => match run_check_obedience(&args) {
            Ok(report) => {
                if args.json {
                    match serde_json::to_string_pretty(&report) {
                        Ok(s) => println!("{s}"),
                        Err(e) => {
                            eprintln!("error: {e}");
                            return 1;
                        }
                    }
                } else {
                    print_report(&report);
                }
                if report.obedient {
                    0
                } else {
                    2
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
    }
}
