use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use lonflow::analysis::AnalysisError;
use lonflow::laplacian::LaplacianError;
use lonflow::lon::LonError;
use lonflow::metrics::MetricsError;
use lonflow::qap::QapError;
use lonflow::search::SearchError;

mod commands;
mod config;

#[derive(Debug, thiserror::Error)]
pub(crate) enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<QapError> for CliError {
    fn from(e: QapError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<LonError> for CliError {
    fn from(e: LonError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<LaplacianError> for CliError {
    fn from(e: LaplacianError) -> Self {
        match e {
            LaplacianError::Numerical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Numerical(_) => CliError::Numerical(e.to_string()),
            MetricsError::Laplacian(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lonflow",
    version,
    about = "Local optima networks for QAP: extraction, flow metrics, and analysis"
)]
pub(crate) struct Cli {
    /// Config file with `key=value` lines mirroring the long flags.
    /// Flags given on the command line win over the file.
    #[arg(long, global = true, value_name = "FILE")]
    pub(crate) config: Option<PathBuf>,

    /// Worker threads for parallel sections (0 or absent: all cores).
    /// Parallelism never changes output bytes.
    #[arg(long, global = true, value_name = "N")]
    pub(crate) jobs: Option<usize>,

    #[command(subcommand)]
    pub(crate) command: Command,
}

#[derive(Debug, Subcommand)]
pub(crate) enum Command {
    /// Sample a local optima network from repeated ILS runs on a QAP instance
    ExtractLon(ExtractLonArgs),
    /// Compute network and flow features for stored networks
    Metrics(MetricsArgs),
    /// Measure solver performance (mean gap to best known) on an instance
    RunPerf(RunPerfArgs),
    /// Correlate network features with solver performance
    Correlate(CorrelateArgs),
    /// Render a network as Graphviz DOT with a JSON layout companion
    Viz(VizArgs),
    /// Aggregate strongly connected component statistics per regime
    SccTable(SccTableArgs),
    /// Export a feature table for downstream analysis
    ExportFeatures(ExportFeaturesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum KMode {
    /// Perturbation strength k = max(1, round(n/8))
    Low,
    /// Perturbation strength k = max(1, round(3n/4))
    High,
}

impl FromStr for KMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(KMode::Low),
            "high" => Ok(KMode::High),
            other => Err(format!("expected `low` or `high`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum Mode {
    /// Keep transition counts as edge weights
    Weighted,
    /// Collapse every edge weight to 1
    Binarized,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weighted" => Ok(Mode::Weighted),
            "binarized" => Ok(Mode::Binarized),
            other => Err(format!("expected `weighted` or `binarized`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum Algorithm {
    Ils,
    Rots,
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ils" => Ok(Algorithm::Ils),
            "rots" => Ok(Algorithm::Rots),
            other => Err(format!("expected `ils` or `rots`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum Profile {
    /// 30 runs, stagnation 1000, 10000 tabu iterations
    Desk,
    /// 100 runs, stagnation 10000, 100000 tabu iterations
    Paper,
}

impl Profile {
    pub(crate) fn runs(self) -> u64 {
        match self {
            Profile::Desk => 30,
            Profile::Paper => 100,
        }
    }
    pub(crate) fn stagnation(self) -> u64 {
        match self {
            Profile::Desk => 1_000,
            Profile::Paper => 10_000,
        }
    }
    pub(crate) fn rots_iterations(self) -> u64 {
        match self {
            Profile::Desk => 10_000,
            Profile::Paper => 100_000,
        }
    }
    pub(crate) fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }
    }
}

impl FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(format!("expected `desk` or `paper`, got `{other}`")),
        }
    }
}

#[derive(Debug, clap::Args)]
pub(crate) struct ExtractLonArgs {
    /// QAP instance file (QAPLIB plain format)
    #[arg(long, value_name = "FILE")]
    pub(crate) instance: Option<PathBuf>,

    /// Perturbation regime
    #[arg(long, value_enum, value_name = "low|high")]
    pub(crate) k_mode: Option<KMode>,

    /// Number of ILS runs pooled into the network
    #[arg(long, value_name = "N")]
    pub(crate) runs: Option<u64>,

    /// Stop a run after this many non-improving accepted steps
    #[arg(long, value_name = "N")]
    pub(crate) stagnation: Option<u64>,

    /// Base seed; run r uses a seed derived from (seed, r)
    #[arg(long, value_name = "SEED")]
    pub(crate) seed: Option<u64>,

    /// Preset for runs/stagnation (explicit flags win)
    #[arg(long, value_enum, value_name = "desk|paper")]
    pub(crate) profile: Option<Profile>,

    /// Keep node permutations in the output file
    #[arg(long)]
    pub(crate) store_perms: bool,

    /// Output network file
    #[arg(long, value_name = "FILE")]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub(crate) struct MetricsArgs {
    /// Network files or directories containing `*.lon` files
    #[arg(value_name = "PATH")]
    pub(crate) paths: Vec<PathBuf>,

    /// Edge weight handling
    #[arg(long, value_enum, value_name = "weighted|binarized")]
    pub(crate) mode: Option<Mode>,

    /// PageRank damping factor (default 0.85)
    #[arg(long, value_name = "D")]
    pub(crate) damping: Option<f64>,

    /// Best-known fitness table (`name value` lines)
    #[arg(long, value_name = "FILE")]
    pub(crate) best_known: Option<PathBuf>,

    /// Also write each network's dense projector to this directory
    #[arg(long, value_name = "DIR")]
    pub(crate) gamma_dump: Option<PathBuf>,

    /// Output CSV (default: stdout)
    #[arg(long, value_name = "FILE")]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub(crate) struct RunPerfArgs {
    /// QAP instance file (QAPLIB plain format)
    #[arg(long, value_name = "FILE")]
    pub(crate) instance: Option<PathBuf>,

    /// Solver to measure
    #[arg(long, value_enum, value_name = "ils|rots")]
    pub(crate) algorithm: Option<Algorithm>,

    /// Number of independent runs
    #[arg(long, value_name = "N")]
    pub(crate) runs: Option<u64>,

    /// Base seed; run r uses a seed derived from (seed, r)
    #[arg(long, value_name = "SEED")]
    pub(crate) seed: Option<u64>,

    /// Best-known fitness table (`name value` lines); required
    #[arg(long, value_name = "FILE")]
    pub(crate) best_known: Option<PathBuf>,

    /// ILS perturbation regime (default: low)
    #[arg(long, value_enum, value_name = "low|high")]
    pub(crate) k_mode: Option<KMode>,

    /// ILS stagnation limit
    #[arg(long, value_name = "N")]
    pub(crate) stagnation: Option<u64>,

    /// Tabu search iteration budget
    #[arg(long, value_name = "N")]
    pub(crate) iterations: Option<u64>,

    /// Preset for runs/stagnation/iterations (explicit flags win)
    #[arg(long, value_enum, value_name = "desk|paper")]
    pub(crate) profile: Option<Profile>,

    /// Output CSV (default: stdout)
    #[arg(long, value_name = "FILE")]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub(crate) struct CorrelateArgs {
    /// Feature table CSV as written by export-features
    #[arg(long, value_name = "FILE")]
    pub(crate) features: Option<PathBuf>,

    /// Performance CSV as written by run-perf (joined by instance name)
    #[arg(long, value_name = "FILE")]
    pub(crate) perf: Option<PathBuf>,

    /// Output CSV (default: stdout)
    #[arg(long, value_name = "FILE")]
    pub(crate) out: Option<PathBuf>,

    /// Print a readable table to stdout instead of CSV
    #[arg(long)]
    pub(crate) text: bool,
}

#[derive(Debug, clap::Args)]
pub(crate) struct VizArgs {
    /// Network file to render
    #[arg(value_name = "FILE")]
    pub(crate) lon: Option<PathBuf>,

    /// Output DOT file (default: stdout)
    #[arg(long, value_name = "FILE")]
    pub(crate) out: Option<PathBuf>,

    /// Also write node placement data as JSON
    #[arg(long, value_name = "FILE")]
    pub(crate) layout_json: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub(crate) struct SccTableArgs {
    /// Network files or directories containing `*.lon` files
    #[arg(value_name = "PATH")]
    pub(crate) paths: Vec<PathBuf>,

    /// Output CSV (default: stdout)
    #[arg(long, value_name = "FILE")]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub(crate) struct ExportFeaturesArgs {
    /// Network files or directories containing `*.lon` files
    #[arg(value_name = "PATH")]
    pub(crate) paths: Vec<PathBuf>,

    /// Edge weight handling
    #[arg(long, value_enum, value_name = "weighted|binarized")]
    pub(crate) mode: Option<Mode>,

    /// PageRank damping factor (default 0.85)
    #[arg(long, value_name = "D")]
    pub(crate) damping: Option<f64>,

    /// Best-known fitness table (`name value` lines)
    #[arg(long, value_name = "FILE")]
    pub(crate) best_known: Option<PathBuf>,

    /// Performance CSV as written by run-perf (fills the gap columns)
    #[arg(long, value_name = "FILE")]
    pub(crate) perf: Option<PathBuf>,

    /// Output CSV (default: stdout)
    #[arg(long, value_name = "FILE")]
    pub(crate) out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
