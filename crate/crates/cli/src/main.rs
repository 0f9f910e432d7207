//! `transport`: simulate studies, estimate transported treatment effects and
//! run replicated simulation studies from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use transport_core::diagnostics::Thresholds;
use transport_core::estimators::{EstimationSettings, PropensityPolicy};
use transport_core::harness::{diagnose_report, estimate_report, render_boxplot_svg, run_replications, HarnessError};
use transport_core::numerics::RandomSource;
use transport_core::simulation::{generate_dataset, ConfigError, SimulationConfig, SimulationError};
use transport_core::{parse_csv, serialize_csv, DomainError, Method};

#[derive(Parser)]
#[command(name = "transport", version, about = "Transport randomized-trial effects to a target population")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one simulated dataset as CSV.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the target-population ATE and run diagnostics on a CSV dataset.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated subset of naive, ols, ipsw, gformula.
        #[arg(long, default_value = "naive,ols,ipsw,gformula")]
        methods: String,
        #[arg(long, default_value_t = 0.5)]
        e1: f64,
        #[arg(long, default_value_t = 1)]
        degree: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diagnostics only.
    Diagnose {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the replicated simulation study.
    Replicate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set noise_sd=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DomainError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("no estimator succeeded: {0}")]
    AllMethodsFailed(String, bool),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IoError",
            CliError::Config(_) => "ConfigError",
            CliError::Data(e) => match e {
                DomainError::EmptyDataset => "EmptyDataset",
                DomainError::MissingArmData { .. } => "MissingArmData",
                DomainError::TargetWithOutcome { .. } => "TargetWithOutcome",
                DomainError::NonFiniteValue { .. } => "NonFiniteValue",
                DomainError::DegenerateTrial { .. } => "DegenerateTrial",
                DomainError::MalformedRow { .. } => "MalformedRow",
            },
            CliError::Usage(_) => "UsageError",
            CliError::Simulation(_) => "SimulationError",
            CliError::Harness(HarnessError::ReplicationFailed { .. }) => "ReplicationFailed",
            CliError::Harness(HarnessError::InsufficientReplications { .. }) => "InsufficientReplications",
            CliError::Harness(_) => "HarnessError",
            CliError::AllMethodsFailed(..) => "AllMethodsFailed",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Harness(HarnessError::ReplicationFailed { last, .. }) if last.is_numerical() => 3,
            CliError::AllMethodsFailed(_, true) => 3,
            _ => 2,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(sim: &SimArgs) -> Result<SimulationConfig, CliError> {
    let mut config = match &sim.config {
        Some(path) => SimulationConfig::from_kv_text(&read(path)?)?,
        None => SimulationConfig::default(),
    };
    for item in &sim.overrides {
        let (key, value) =
            item.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
        config.set(key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn parse_methods(list: &str) -> Result<Vec<Method>, CliError> {
    let mut methods = Vec::new();
    for item in list.split(',').filter(|s| !s.trim().is_empty()) {
        let m = Method::parse(item).ok_or_else(|| CliError::Usage(format!("unknown method `{}`", item.trim())))?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err(CliError::Usage("no methods selected".into()));
    }
    Ok(methods)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { sim, seed, out } => {
            let config = load_config(&sim)?.calibrated()?;
            let study = generate_dataset(&config, &mut RandomSource::new(seed).substream(0))?;
            emit(out.as_deref(), &serialize_csv(&study.dataset))
        }
        Command::Estimate { data, methods, e1, degree, out } => {
            let methods = parse_methods(&methods)?;
            let policy = PropensityPolicy::new(e1).map_err(|e| CliError::Usage(e.to_string()))?;
            let dataset = parse_csv(&read(&data)?)?;
            let settings = EstimationSettings { policy, basis_degree: degree };
            let report = estimate_report(&dataset, &methods, &settings, &Thresholds::default(), None);
            emit(out.as_deref(), &report.to_json())?;
            if report.succeeded() == 0 {
                let errors: Vec<_> = report.errors().collect();
                let numerical = errors.iter().any(|e| e.is_numerical());
                let text = errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ");
                return Err(CliError::AllMethodsFailed(text, numerical));
            }
            Ok(())
        }
        Command::Diagnose { data, out } => {
            let dataset = parse_csv(&read(&data)?)?;
            emit(out.as_deref(), &diagnose_report(&dataset, &Thresholds::default(), None).to_json())
        }
        Command::Replicate { sim, reps, seed, threads, out, svg } => {
            let config = load_config(&sim)?;
            let summary = run_replications(&config, reps, seed, threads)?;
            if let Some(path) = &svg {
                let doc = render_boxplot_svg(&summary)?;
                emit(Some(path), &doc)?;
            }
            emit(out.as_deref(), &summary.to_json())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::from(e.exit_code())
        }
    }
}
