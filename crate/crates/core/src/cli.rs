//! The `robust-bisim` command line.
//!
//! Exit codes: 0 success, 1 input error, 2 value iteration did not
//! converge, 3 internal error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bisim::{bisimilarity, quotient};
use crate::chain::{ChainOptions, LabelledMarkovChain, State};
use crate::distance::{delta_with_options, extract_policy, DistanceError, DistanceOptions};
use crate::harness::{default_grid, parse_epsilon_list, sweep_with_options, FamilyKind, HarnessError, SWEEP_HEADER};
use crate::relation::Partition;
use crate::robust::{non_robust_pairs, robust_bisimilarity};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "robust-bisim", version, about = "Bisimilarity, robust bisimilarity and bisimilarity distances of labelled Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the bisimilarity or robust bisimilarity partition and write the quotient chain.
    Minimize(MinimizeArgs),
    /// Print bisimilarity distances as CSV.
    Distance(DistanceArgs),
    /// Sweep a coin family over perturbations and write CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Transitions file.
    #[arg(long)]
    pub tra: PathBuf,
    /// Labels file.
    #[arg(long)]
    pub lab: PathBuf,
    /// Accept models whose states all share one label.
    #[arg(long)]
    pub allow_single_label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Bisim,
    Robust,
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Mode::Robust)]
    pub mode: Mode,
    /// Write the quotient chain to `<OUT>.tra` and `<OUT>.lab`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Dense,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = crate::distance::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = crate::distance::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Comma-separated `s:t` pairs, by state name or id.
    #[arg(long)]
    pub pairs: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write the optimal policy's couplings to this file.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Worker threads for one value-iteration sweep.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Stop after value iteration, without policy evaluation.
    #[arg(long)]
    pub no_policy_evaluation: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// geometric-coin, rigged-coin, random-walk or all.
    #[arg(long)]
    pub family: String,
    /// Comma-separated rationals in [0, 1/2]; defaults to 0,1/1024,1/256,1/64,1/16,1/8,1/4,1/2.
    #[arg(long)]
    pub eps: Option<String>,
    /// Output file; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = crate::distance::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = crate::distance::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    NotConverged(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::NotConverged(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<DistanceError> for CliError {
    fn from(e: DistanceError) -> Self {
        match e {
            DistanceError::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            DistanceError::InvalidTolerance(_) => CliError::Input(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Distance(d) => d.into(),
            HarnessError::Io(io) => CliError::Input(io.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(rendered.as_bytes()) } else { stdout.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = match command {
        Command::Minimize(args) => minimize(args)?,
        Command::Distance(args) => distance(args)?,
        Command::Sweep(args) => sweep(args)?,
    };
    stdout.write_all(text.as_bytes()).map_err(|e| CliError::Internal(e.to_string()))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load(args: &ModelArgs) -> Result<LabelledMarkovChain, CliError> {
    let tra = read(&args.tra)?;
    let lab = read(&args.lab)?;
    LabelledMarkovChain::parse(&tra, &lab, ChainOptions { allow_single_label: args.allow_single_label })
        .map_err(|e| CliError::Input(e.to_string()))
}

fn write_partition(out: &mut String, chain: &LabelledMarkovChain, p: &Partition) {
    for (id, block) in p.blocks().iter().enumerate() {
        let names: Vec<&str> = block.iter().map(|&s| chain.name(s)).collect();
        let _ = writeln!(out, "block {id}: {}", names.join(" "));
    }
}

fn minimize(args: &MinimizeArgs) -> Result<String, CliError> {
    let chain = load(&args.model)?;
    let sim = bisimilarity(&chain);
    let mut out = String::new();
    let result = match args.mode {
        Mode::Bisim => {
            let _ = writeln!(out, "blocks: {}", sim.num_blocks());
            write_partition(&mut out, &chain, &sim);
            sim
        }
        Mode::Robust => {
            let robust = robust_bisimilarity(&chain);
            let _ = writeln!(out, "blocks: {}", robust.num_blocks());
            write_partition(&mut out, &chain, &robust);
            let _ = writeln!(out, "bisimilarity blocks: {}", sim.num_blocks());
            write_partition(&mut out, &chain, &sim);
            let pairs = non_robust_pairs(&sim, &robust);
            let _ = writeln!(out, "non-robust pairs: {}", pairs.len());
            for (s, t) in pairs {
                let _ = writeln!(out, "{},{}", chain.name(s), chain.name(t));
            }
            robust
        }
    };
    if let Some(prefix) = &args.out {
        let q = quotient(&chain, &result).map_err(|e| CliError::Internal(e.to_string()))?;
        write(&with_suffix(prefix, "tra"), &q.to_tra())?;
        write(&with_suffix(prefix, "lab"), &q.to_lab())?;
    }
    Ok(out)
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn resolve(chain: &LabelledMarkovChain, token: &str) -> Result<State, CliError> {
    let token = token.trim();
    chain
        .state_by_name(token)
        .or_else(|| token.parse::<State>().ok().filter(|&s| s < chain.num_states()))
        .ok_or_else(|| CliError::Input(format!("unknown state {token:?}")))
}

fn parse_pairs(chain: &LabelledMarkovChain, text: &str) -> Result<Vec<(State, State)>, CliError> {
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (s, t) = p
                .split_once(':')
                .ok_or_else(|| CliError::Input(format!("pair {p:?} is not of the form s:t")))?;
            Ok((resolve(chain, s)?, resolve(chain, t)?))
        })
        .collect()
}

fn distance(args: &DistanceArgs) -> Result<String, CliError> {
    let chain = load(&args.model)?;
    let pairs = args.pairs.as_deref().map(|p| parse_pairs(&chain, p)).transpose()?;
    let options = DistanceOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        threads: args.threads.max(1),
        policy_evaluation: !args.no_policy_evaluation,
    };
    let report = delta_with_options(&chain, &bisimilarity(&chain).to_relation(), &options)?;
    if let Some(path) = &args.policy {
        write(path, &extract_policy(&chain, &report.distances).to_text(&chain))?;
    }
    Ok(match args.format {
        Format::Csv => report.distances.to_csv(&chain, pairs.as_deref()),
        Format::Dense => report.distances.to_dense_text(),
    })
}

fn sweep(args: &SweepArgs) -> Result<String, CliError> {
    let kinds: Vec<FamilyKind> = if args.family == "all" {
        FamilyKind::ALL.to_vec()
    } else {
        vec![args.family.parse::<FamilyKind>()?]
    };
    let grid = match &args.eps {
        Some(text) => parse_epsilon_list(text)?,
        None => default_grid(),
    };
    let options = DistanceOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        threads: args.threads.max(1),
        ..DistanceOptions::default()
    };
    let mut csv = format!("{SWEEP_HEADER}\n");
    for kind in kinds {
        let mut buffer = Vec::new();
        sweep_with_options(kind, &grid, &options, &mut buffer)?;
        let text = String::from_utf8(buffer).map_err(|e| CliError::Internal(e.to_string()))?;
        // each family's block repeats the header
        csv.push_str(text.split_once('\n').map_or("", |(_, rows)| rows));
    }
    match &args.out {
        Some(path) => {
            write(path, &csv)?;
            Ok(String::new())
        }
        None => Ok(csv),
    }
}
