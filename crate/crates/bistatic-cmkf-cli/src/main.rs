//! Campaign runner binary: binds flat TOML configs or built-in presets to
//! the Monte Carlo drivers and writes machine-readable CSV results.
//!
//! Outputs land in `--out` if given, else `$CMKF_OUT_DIR`, else the current
//! directory. The process exits 0 only if every output file was written;
//! on any failure the files written so far are removed.

mod config;
mod output;

use std::env;
use std::fmt;
use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use bistatic_cmkf::{
    chi2_mean_bounds, run_static_bias_campaign, run_static_nees_campaign, run_tracking_campaign,
    CampaignDiagnostics, ConversionMethod, MetricsError, Parallelism, SimulationError,
};
use clap::{Args, Parser, Subcommand};

use config::{
    BiasConfig, ConfigError, NeesConfig, TrackConfig, BIAS_PRESETS, NEES_PRESETS, TRACK_PRESETS,
};
use output::{OutputError, OutputSet};

const OUT_DIR_ENV: &str = "CMKF_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "cmkf",
    version,
    about = "Monte Carlo campaigns for bistatic converted-measurement tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static conversion bias: per-bearing sample means vs truth, plus 2D
    /// histograms of the conventional conversion cloud
    StaticBias(CampaignArgs),
    /// Static consistency: average NEES per grid point of one swept
    /// parameter, with chi-square mean bounds
    StaticNees(CampaignArgs),
    /// Dynamic tracking: per-scan RMSE and NEES for all three conversion
    /// methods on shared measurement streams
    Track(CampaignArgs),
    /// Print chi-square mean-consistency bounds for a run count, degrees of
    /// freedom, and confidence level
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct CampaignArgs {
    /// TOML config file (see configs/ for canonical examples)
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "preset",
        conflicts_with = "preset"
    )]
    config: Option<PathBuf>,
    /// Built-in experiment preset
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override the config's random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's Monte Carlo run count
    #[arg(long)]
    runs: Option<u64>,
    /// Output directory (default ".", or $CMKF_OUT_DIR if set)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Cap the worker-thread count
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

impl CampaignArgs {
    fn config_text(&self, presets: &[(&'static str, &'static str)]) -> Result<String, CliError> {
        if let Some(path) = &self.config {
            return fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
                path: path.clone(),
                source,
            });
        }
        // clap guarantees one of the two flags is present
        let name = self.preset.as_deref().expect("preset");
        presets
            .iter()
            .find(|(preset, _)| *preset == name)
            .map(|(_, text)| (*text).to_string())
            .ok_or_else(|| CliError::UnknownPreset {
                name: name.to_string(),
                valid: presets.iter().map(|(preset, _)| *preset).collect(),
            })
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn configure_threads(&self) -> Result<(), CliError> {
        let Some(threads) = self.threads else {
            return Ok(());
        };
        if threads == 0 {
            return Err(CliError::Threads("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|err| CliError::Threads(err.to_string()))
    }
}

#[derive(Args)]
struct BoundsArgs {
    /// Monte Carlo run count
    runs: usize,
    /// Degrees of freedom per run
    dof: usize,
    /// Two-sided confidence level in (0, 1)
    confidence: f64,
}

#[derive(Debug)]
enum CliError {
    ReadConfig { path: PathBuf, source: io::Error },
    UnknownPreset { name: String, valid: Vec<&'static str> },
    Threads(String),
    Config(ConfigError),
    Campaign(SimulationError),
    Metrics(MetricsError),
    Output(OutputError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::ReadConfig { path, source } => {
                write!(f, "cannot read config {}: {source}", path.display())
            }
            CliError::UnknownPreset { name, valid } => {
                write!(f, "unknown preset \"{name}\"; valid: {}", valid.join(", "))
            }
            CliError::Threads(msg) => write!(f, "thread pool: {msg}"),
            CliError::Config(err) => err.fmt(f),
            CliError::Campaign(err) => write!(f, "campaign failed: {err}"),
            CliError::Metrics(err) => err.fmt(f),
            CliError::Output(err) => err.fmt(f),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(err: ConfigError) -> Self {
        CliError::Config(err)
    }
}

impl From<SimulationError> for CliError {
    fn from(err: SimulationError) -> Self {
        CliError::Campaign(err)
    }
}

impl From<MetricsError> for CliError {
    fn from(err: MetricsError) -> Self {
        CliError::Metrics(err)
    }
}

impl From<OutputError> for CliError {
    fn from(err: OutputError) -> Self {
        CliError::Output(err)
    }
}

fn report(paths: &[PathBuf], diagnostics: &CampaignDiagnostics) {
    for path in paths {
        println!("wrote {}", path.display());
    }
    println!(
        "runs={} clamped={} ducm_fallbacks={} covariance_adjustments={} checksum={:016x}",
        diagnostics.runs,
        diagnostics.clamp_events,
        diagnostics.ducm_fallback_events,
        diagnostics.covariance_adjust_events,
        diagnostics.measurement_checksum
    );
}

fn cmd_static_bias(args: &CampaignArgs) -> Result<(), CliError> {
    let text = args.config_text(BIAS_PRESETS)?;
    let mut cfg = BiasConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs_per_bearing = runs;
    }
    args.configure_threads()?;
    let result = run_static_bias_campaign(&cfg.to_campaign()?, Parallelism::Threaded)?;
    let mut set = OutputSet::create(&args.out_dir())?;
    output::write_bias(&mut set, &result)?;
    report(&set.commit(), &result.diagnostics);
    Ok(())
}

fn cmd_static_nees(args: &CampaignArgs) -> Result<(), CliError> {
    let text = args.config_text(NEES_PRESETS)?;
    let mut cfg = NeesConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs_per_point = runs;
    }
    args.configure_threads()?;
    let result = run_static_nees_campaign(&cfg.to_campaign()?, Parallelism::Threaded)?;
    let mut set = OutputSet::create(&args.out_dir())?;
    output::write_nees(&mut set, cfg.swept.file_stem(), cfg.swept.is_angle(), &result)?;
    report(&set.commit(), &result.diagnostics);
    Ok(())
}

fn cmd_track(args: &CampaignArgs) -> Result<(), CliError> {
    let text = args.config_text(TRACK_PRESETS)?;
    let mut cfg = TrackConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.run_count = runs;
    }
    args.configure_threads()?;
    let result = run_tracking_campaign(
        &cfg.to_campaign()?,
        &ConversionMethod::ALL,
        Parallelism::Threaded,
    )?;
    let mut set = OutputSet::create(&args.out_dir())?;
    output::write_track(&mut set, &result)?;
    report(&set.commit(), &result.diagnostics);
    Ok(())
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), CliError> {
    let (low, high) = chi2_mean_bounds(args.runs, args.dof, args.confidence)?;
    println!("{low:.4} {high:.4}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::StaticBias(args) => cmd_static_bias(args),
        Command::StaticNees(args) => cmd_static_nees(args),
        Command::Track(args) => cmd_track(args),
        Command::Bounds(args) => cmd_bounds(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
