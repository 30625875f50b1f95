//! Command-line front end: fixture generation, tree encoding, verification,
//! timing, lockstep simulation and cost curves.
//!
//! [`run`] takes the argument list and output streams so the whole CLI can
//! be driven in-process by tests.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use spectree::data::{load_dataset_csv, load_tree_json};
use spectree::{Dataset, EncodedTree};

pub mod bench;
mod commands;
pub mod geometry;

pub use crate::geometry::{Geometry, Strategy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        source: spectree::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    /// Verification ran and found disagreements; the report is already out.
    #[error("verification failed: {0} mismatching records")]
    Mismatch(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input { .. } | CliError::Io(_) => EXIT_IO,
            CliError::Mismatch(_) => EXIT_MISMATCH,
        }
    }
}

impl From<spectree::Error> for CliError {
    fn from(e: spectree::Error) -> Self {
        match e {
            spectree::Error::Io(io) => CliError::Io(io),
            other => CliError::Usage(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "spectree",
    version,
    about = "Branchless and speculative classification-tree evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a linked-tree JSON file to the breadth-first encoding.
    Encode(EncodeArgs),
    /// Generate a synthetic tree and dataset.
    Gen(GenArgs),
    /// Check every strategy against the serial evaluator.
    Verify(VerifyArgs),
    /// Time strategies over repeated runs.
    Bench(BenchArgs),
    /// Replay kernels on the lockstep SIMD model and report counters.
    Simulate(SimulateArgs),
    /// Evaluate the closed-form cost model over a parameter grid.
    Cost(CostArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LeafStyle {
    NegInf,
    PosInf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Linked tree JSON (`{"version":1,"root":{...}}`).
    #[arg(long)]
    pub input: PathBuf,
    /// Encoded tree JSON to write.
    #[arg(long)]
    pub output: PathBuf,
    /// How leaf thresholds are written.
    #[arg(long, value_enum, default_value = "neg-inf")]
    pub leaf_threshold: LeafStyle,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Reproduce the reference workload: depth 11, 16 leaves, 19 attributes,
    /// 7 classes, 16,384 records tiled four times.
    #[arg(long)]
    pub like_paper: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 11)]
    pub depth: usize,
    #[arg(long, default_value_t = 16)]
    pub leaves: usize,
    #[arg(long, default_value_t = 19)]
    pub attributes: usize,
    #[arg(long, default_value_t = 7)]
    pub classes: u32,
    #[arg(long, default_value_t = 65_536)]
    pub records: usize,
    /// Sample records uniformly in [0, 1) instead of uniformly over leaves.
    #[arg(long)]
    pub uniform: bool,
    /// Shuffle record order with this seed.
    #[arg(long)]
    pub shuffle: Option<u64>,
    #[arg(long)]
    pub tree_out: PathBuf,
    #[arg(long)]
    pub data_out: PathBuf,
    /// Also write the linked form of the tree.
    #[arg(long)]
    pub linked_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Encoded tree JSON.
    #[arg(long)]
    pub tree: PathBuf,
    /// Dataset CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Strategies to check; defaults to all of them.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub strategy: Vec<Strategy>,
    #[command(flatten)]
    pub geometry: Geometry,
    /// Write `<strategy>.txt` assignment files into this directory.
    #[arg(long)]
    pub assignments_dir: Option<PathBuf>,
    /// Corrupt one record of the first non-serial result (harness self-test).
    #[arg(long, hide = true)]
    pub inject_mismatch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub strategy: Vec<Strategy>,
    #[command(flatten)]
    pub geometry: Geometry,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    /// Untimed runs before measurement.
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Include raw per-iteration samples in JSON output.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Kernels to replay; defaults to `data,spec`.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub strategy: Vec<Strategy>,
    #[command(flatten)]
    pub geometry: Geometry,
    #[arg(long, default_value_t = 32)]
    pub warp_width: usize,
    /// Pack record groups at lane granularity instead of half warps.
    #[arg(long)]
    pub no_half_warp: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// Each parameter takes a comma list whose items are numbers or inclusive
/// ranges `a..=b` (unit step) or `a..=b:step`.
#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long, default_value = "65536", value_parser = parse_values)]
    pub records: Values,
    #[arg(long, default_value = "64", value_parser = parse_values)]
    pub processors: Values,
    #[arg(long, default_value = "16", value_parser = parse_values)]
    pub group_lanes: Values,
    #[arg(long, default_value = "8", value_parser = parse_values)]
    pub d_mu: Values,
    #[arg(long, default_value = "1", value_parser = parse_values)]
    pub t_eval: Values,
    #[arg(long, default_value = "1", value_parser = parse_values)]
    pub t_class: Values,
    #[arg(long, default_value = "0", value_parser = parse_values)]
    pub t_index: Values,
    #[arg(long, default_value = "0", value_parser = parse_values)]
    pub sigma: Values,
    #[arg(long, default_value = "0", value_parser = parse_values)]
    pub gamma: Values,
    /// Drop the index-computation and transmission constants.
    #[arg(long)]
    pub asymptotic: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Values(pub Vec<f64>);

pub fn parse_values(s: &str) -> Result<Values, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((lo, rest)) = item.split_once("..=") {
            let (hi, step) = match rest.split_once(':') {
                Some((hi, step)) => (hi, step),
                None => (rest, "1"),
            };
            let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if step.is_nan() || step <= 0.0 || !lo.is_finite() || !hi.is_finite() {
                return Err(format!("bad range {item:?}"));
            }
            let n = ((hi - lo) / step + 1e-9).floor();
            if !(0.0..=1e6).contains(&n) {
                return Err(format!("bad range {item:?}"));
            }
            out.extend((0..=n as usize).map(|i| lo + i as f64 * step));
        } else {
            out.push(item.parse::<f64>().map_err(|e| format!("{item:?}: {e}"))?);
        }
    }
    Ok(Values(out))
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match commands::dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(CliError::Mismatch(n)) => {
            let _ = writeln!(err, "verification failed: {n} mismatching records");
            EXIT_MISMATCH
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn read_tree(path: &Path) -> CliResult<EncodedTree> {
    let file = open(path)?;
    load_tree_json(BufReader::new(file)).map_err(|source| input_error(path, source))
}

pub(crate) fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let file = open(path)?;
    load_dataset_csv(BufReader::new(file)).map_err(|source| input_error(path, source))
}

pub(crate) fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| input_error(path, e.into()))
}

pub(crate) fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| input_error(path, e.into()))
}

fn input_error(path: &Path, source: spectree::Error) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        source,
    }
}
