//! `mecke`: runs one verification scenario per invocation and writes a JSON
//! report with CSV side tables.
//!
//! Exit status: 0 when every gate passes, 1 when a gate fails, 2 for a
//! malformed configuration or command line (the offending field is named),
//! 3 when a computation fails.

mod config;
mod output;
mod scenarios;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mecke_core::mc_stats::default_workers;
use mecke_core::{DensityCatalog, EpsilonVector, ProcessCatalog, Window};

use config::{IntensityConfig, MeckePalmConfig, OracleConfig, PartitionsConfig, ScenarioConfig, ScenarioKind, SchemaError};
use scenarios::RunError;

#[derive(Parser, Debug)]
#[command(name = "mecke", version, about = "Monte Carlo verification of Poisson and Levy-system identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    /// Master seed, replacing `budgets.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replicate count, replacing `budgets.replicates`.
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// JSON report path; CSV side tables are written next to it.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "MECKE_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Runs the scenario described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Mixed Mecke-Palm identity for a catalog process on a uniform window.
    VerifyMeckePalm {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Catalog name (e.g. `diag-indicator`) or a JSON object with `kind`.
        #[arg(long)]
        process: Option<String>,
        /// One bit per argument: 1 integrates against ω, 0 against σ.
        #[arg(long)]
        epsilon: Option<String>,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Product moments of multiple integrals, from a spec file.
    Moments {
        #[arg(long, visible_alias = "config")]
        spec: PathBuf,
    },
    /// Series evaluation of `E g(ω)` for a 0-process, checked by simulation.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Catalog name or JSON object, e.g. `{"kind":"exp-count","theta":1}`.
        #[arg(long)]
        g: Option<String>,
        #[arg(long)]
        nmax: Option<usize>,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Simple, general mixed, or predictable-factor Levy system.
    LevySystem {
        #[arg(long)]
        config: PathBuf,
    },
    /// Joint law of exit time and pre/post-exit positions.
    ExitLaw {
        #[arg(long)]
        config: PathBuf,
    },
    /// Mean, variance and brackets of a compensated jump sum.
    Martingale {
        #[arg(long)]
        config: PathBuf,
    },
    /// Lists the (ε-admissible) set partitions of {1, …, n} grouped by type.
    Partitions {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        epsilon: Option<String>,
    },
}

/// Uniform intensity on `[0, 1]` with the given total mass, for flag-built
/// scenarios.
#[derive(Args, Debug, Clone)]
struct WindowArgs {
    /// Total mass σ(𝒳) of the uniform intensity on [0, 1].
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

impl WindowArgs {
    fn intensity(&self) -> IntensityConfig {
        IntensityConfig {
            window: Window::unit(1),
            density: DensityCatalog::Constant { value: self.sigma },
        }
    }
}

fn parse_catalog(text: &str, flag: &str) -> Result<ProcessCatalog, SchemaError> {
    let value: serde_json::Value = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| SchemaError::new(flag, e.to_string()))?
    } else {
        serde_json::json!({ "kind": text })
    };
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { flag.to_string() } else { format!("{flag}.{path}") };
        SchemaError::new(field, e.into_inner().to_string())
    })
}

fn parse_epsilon(text: &str, flag: &str) -> Result<EpsilonVector, SchemaError> {
    text.parse().map_err(|e: mecke_core::Error| SchemaError::new(flag, e.to_string()))
}

fn load_expecting(path: &Path, kind: ScenarioKind) -> Result<ScenarioConfig, SchemaError> {
    let config = ScenarioConfig::load(path)?;
    if config.scenario != kind {
        return Err(SchemaError::new(
            "scenario",
            format!("is {} but the {} subcommand was used", config.scenario.name(), kind.name()),
        ));
    }
    Ok(config)
}

fn build_config(command: &Command) -> Result<ScenarioConfig, SchemaError> {
    match command {
        Command::Run { config } => ScenarioConfig::load(config),
        Command::Moments { spec } => load_expecting(spec, ScenarioKind::Moments),
        Command::LevySystem { config } => load_expecting(config, ScenarioKind::LevySystem),
        Command::ExitLaw { config } => load_expecting(config, ScenarioKind::ExitLaw),
        Command::Martingale { config } => load_expecting(config, ScenarioKind::Martingale),
        Command::VerifyMeckePalm {
            config,
            process,
            epsilon,
            window,
        } => {
            let mut c = match config {
                Some(path) => load_expecting(path, ScenarioKind::VerifyMeckePalm)?,
                None => {
                    let mut c = ScenarioConfig::empty(ScenarioKind::VerifyMeckePalm);
                    c.intensity = Some(window.intensity());
                    c
                }
            };
            if process.is_some() || epsilon.is_some() {
                let process = match (process, &c.mecke_palm) {
                    (Some(p), _) => parse_catalog(p, "--process")?,
                    (None, Some(block)) => block.process.clone(),
                    (None, None) => return Err(SchemaError::new("--process", "missing")),
                };
                let epsilon = match (epsilon, &c.mecke_palm) {
                    (Some(e), _) => parse_epsilon(e, "--epsilon")?,
                    (None, Some(block)) => block.epsilon.clone(),
                    (None, None) => return Err(SchemaError::new("--epsilon", "missing")),
                };
                if epsilon.len() != process.arity() {
                    return Err(SchemaError::new(
                        "--epsilon",
                        format!("has length {} but the process has arity {}", epsilon.len(), process.arity()),
                    ));
                }
                let expansion = c.mecke_palm.as_ref().map(|b| b.expansion).unwrap_or_default();
                c.mecke_palm = Some(MeckePalmConfig {
                    process,
                    epsilon,
                    expansion,
                });
            }
            Ok(c)
        }
        Command::Oracle { config, g, nmax, window } => {
            let mut c = match config {
                Some(path) => load_expecting(path, ScenarioKind::Oracle)?,
                None => {
                    let mut c = ScenarioConfig::empty(ScenarioKind::Oracle);
                    c.intensity = Some(window.intensity());
                    c
                }
            };
            if let Some(g) = g {
                let g = parse_catalog(g, "--g")?;
                let bound = matches!(g, ProcessCatalog::ExpCount { theta } if theta >= 0.0).then_some(1.0);
                c.oracle = Some(OracleConfig {
                    g,
                    n_max: None,
                    bound,
                    quadrature: None,
                    monte_carlo: true,
                });
            }
            if let Some(n) = nmax {
                match c.oracle.as_mut() {
                    Some(block) => block.n_max = Some(*n),
                    None => return Err(SchemaError::new("--g", "missing")),
                }
            }
            Ok(c)
        }
        Command::Partitions { config, n, epsilon } => {
            let mut c = match config {
                Some(path) => load_expecting(path, ScenarioKind::Partitions)?,
                None => ScenarioConfig::empty(ScenarioKind::Partitions),
            };
            if n.is_some() || epsilon.is_some() {
                let n = match (n, &c.partitions) {
                    (Some(n), _) => *n,
                    (None, Some(block)) => block.n,
                    (None, None) => return Err(SchemaError::new("--n", "missing")),
                };
                let epsilon = epsilon.as_deref().map(|e| parse_epsilon(e, "--epsilon")).transpose()?;
                c.partitions = Some(PartitionsConfig { n, epsilon });
            }
            Ok(c)
        }
    }
}

fn apply(overrides: &Overrides, config: &mut ScenarioConfig) -> Result<(), SchemaError> {
    if let Some(seed) = overrides.seed {
        config.budgets.seed = seed;
    }
    if let Some(r) = overrides.replicates {
        config.budgets.replicates = r;
    }
    config.budgets.workers = match overrides.workers {
        Some(0) => return Err(SchemaError::new("--workers", "must be at least 1")),
        Some(w) => w,
        None => default_workers(),
    };
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match build_config(&cli.command) {
        Ok(c) => c,
        Err(e) => return schema_failure(&e),
    };
    if let Err(e) = apply(&cli.overrides, &mut config) {
        return schema_failure(&e);
    }
    let start = Instant::now();
    let outcome = match scenarios::run(&config) {
        Ok(o) => o,
        Err(RunError::Schema(e)) => return schema_failure(&e),
        Err(e @ RunError::Numeric { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let wall = start.elapsed();
    for line in output::summary_lines(&outcome) {
        println!("{line}");
    }
    let report_path = cli
        .overrides
        .report
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from));
    if let Some(path) = report_path {
        let report = output::report_json(&config, &outcome, wall);
        match output::write_all(&path, &report, &outcome) {
            Ok(files) => {
                for f in files {
                    println!("wrote {}", f.display());
                }
            }
            Err(e) => {
                eprintln!("error: cannot write report {}: {e}", path.display());
                return ExitCode::from(3);
            }
        }
    }
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn schema_failure(e: &SchemaError) -> ExitCode {
    eprintln!("error: invalid configuration: {e}");
    ExitCode::from(2)
}
