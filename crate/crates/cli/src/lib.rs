//! Command-line front end: `downlink`, `uplink` and `sweep` experiments.
//!
//! Settings come from the built-in defaults, then the `--config` file, then
//! the `--seed`, `--trials` and `--samples` flags, each overriding the last.

pub mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfmimo::config::LoadError;
use cfmimo::montecarlo::{cdf, run_experiments, sweep_users_multi, Scheme, SchemeSpec};
use cfmimo::{ConfigFile, Error};

use output::{cdf_records, ensure_dir, write_records, OutputError, SummaryRecord, SweepRecord};

#[derive(Debug, Parser)]
#[command(name = "cfmimo", version, about = "Cellular and cell-free massive MIMO spectral-efficiency experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-user SE CDFs for conjugate beamforming and zero-forcing precoding.
    Downlink(RunArgs),
    /// Per-user SE CDFs for matched-filter and zero-forcing detection.
    Uplink(RunArgs),
    /// Mean sum SE over the configured list of user counts.
    Sweep(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML configuration file; every field is optional.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Topology draws per experiment.
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,
    /// Channel samples per draw for the zero-forcing expectations.
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,
    /// Also write a JSON copy of every CSV file.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config file not found: {0}")]
    ConfigNotFound(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(Error),
    #[error("cannot read config: {0}")]
    ConfigUnreadable(String),
    #[error("simulation failed: {0}")]
    Runtime(Error),
    #[error("cannot write results: {0}")]
    Output(#[from] OutputError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::ConfigNotFound(_) => 3,
            CliError::InvalidConfig(_) => 4,
            CliError::ConfigUnreadable(_) | CliError::Output(_) => 5,
        }
    }
}

/// Exit status for command-line usage errors.
pub const EXIT_USAGE: u8 = 2;

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig { .. } | Error::Domain { .. } => CliError::InvalidConfig(e),
            other => CliError::Runtime(other),
        }
    }
}

/// Defaults, overlaid with the config file and then the flags.
pub fn resolve_config(args: &RunArgs) -> Result<ConfigFile, CliError> {
    let mut file = match &args.config {
        None => ConfigFile::default(),
        Some(path) => ConfigFile::load(path).map_err(|e| match e {
            LoadError::Io { path, kind } if kind == std::io::ErrorKind::NotFound => {
                CliError::ConfigNotFound(path)
            }
            LoadError::Io { .. } => CliError::ConfigUnreadable(e.to_string()),
            LoadError::Invalid(inner) => CliError::InvalidConfig(inner),
        })?,
    };
    if let Some(seed) = args.seed {
        file.sim.seed = seed;
    }
    if let Some(trials) = args.trials {
        file.sim.n_topology_trials = trials;
    }
    if let Some(samples) = args.samples {
        file.sim.n_channel_samples = samples;
    }
    file.validate().map_err(CliError::InvalidConfig)?;
    Ok(file)
}

/// Downlink schemes per layout: ZFP everywhere, CBF with per-AP full power
/// for distributed layouts and max-min CBF for the single-AP cell.
pub fn downlink_specs(layouts: &[usize]) -> Vec<SchemeSpec> {
    layouts
        .iter()
        .flat_map(|&aps| {
            let cbf = if aps == 1 {
                Scheme::DlCbfMaxMin
            } else {
                Scheme::DlCbf
            };
            [SchemeSpec::new(Scheme::DlZfp, aps), SchemeSpec::new(cbf, aps)]
        })
        .collect()
}

pub fn uplink_specs(layouts: &[usize]) -> Vec<SchemeSpec> {
    layouts
        .iter()
        .flat_map(|&aps| {
            [Scheme::UlMfFullCsi, Scheme::UlMfStats, Scheme::UlZf].map(|s| SchemeSpec::new(s, aps))
        })
        .collect()
}

fn run_cdfs(
    file: &ConfigFile,
    specs: &[SchemeSpec],
    out: &Path,
    name: &str,
    json: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let reports = run_experiments(&file.sim, specs)?;
    ensure_dir(out)?;
    let mut written = Vec::new();
    let mut summary = Vec::new();
    for (spec, report) in specs.iter().zip(&reports) {
        let series = cdf(&report.samples)?;
        let stem = format!("cdf_{}", spec.slug(file.sim.antennas));
        written.extend(write_records(out, &stem, &cdf_records(&series), json)?);
        summary.push(SummaryRecord::from(report));
        println!(
            "{:<32} p05 {:>8.4}  median {:>8.4}  sum SE {:>9.4} bit/s/Hz",
            report.scheme_label, report.percentile_05, report.median, report.sum_se_mean
        );
    }
    written.extend(write_records(out, &format!("{name}_summary"), &summary, json)?);
    Ok(written)
}

fn run_sweep(file: &ConfigFile, args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    if file.plan.sweep_users.is_empty() {
        return Err(CliError::InvalidConfig(Error::InvalidConfig {
            field: "experiment.sweep_users",
            reason: "the user-count list is empty".into(),
        }));
    }
    let specs = downlink_specs(&file.plan.layouts);
    let series = sweep_users_multi(&file.sim, &file.plan.sweep_users, &specs)?;
    let mut rows = Vec::new();
    for (spec, points) in specs.iter().zip(&series) {
        let label = spec.label(file.sim.antennas);
        for p in points {
            println!(
                "{label:<32} K {:>3}  sum SE {:>9.4} ± {:.4} bit/s/Hz",
                p.users, p.sum_se_mean, p.sum_se_stderr
            );
            rows.push(SweepRecord::new(&label, p));
        }
    }
    ensure_dir(&args.out)?;
    Ok(write_records(&args.out, "sweep", &rows, args.json)?)
}

/// Runs one parsed command and returns the files it wrote.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    match &cli.command {
        Command::Downlink(args) => {
            let file = resolve_config(args)?;
            let specs = downlink_specs(&file.plan.layouts);
            run_cdfs(&file, &specs, &args.out, "downlink", args.json)
        }
        Command::Uplink(args) => {
            let file = resolve_config(args)?;
            let specs = uplink_specs(&file.plan.layouts);
            run_cdfs(&file, &specs, &args.out, "uplink", args.json)
        }
        Command::Sweep(args) => {
            let file = resolve_config(args)?;
            run_sweep(&file, args)
        }
    }
}

/// Parses `argv`, runs the command and maps the outcome to an exit status.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
