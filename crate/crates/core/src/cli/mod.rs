//! Command-line front end.
//!
//! Exit status is 0 when every requested output was written, 2 for
//! configuration errors (detected before any output is produced) and 1 for
//! failures during a run. Errors are reported on stderr as one JSON object.

mod commands;
mod tables;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corpus::SelectionStrategy;
use crate::evaluation::ReportFormat;
use crate::rerank::FusionMethod;

pub use tables::{probe_report, rerank_report, RerankTableInput};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable inputs, or inconsistent settings.
    Config(String),
    /// Failure after the run started.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn record(&self) -> ErrorRecord<'_> {
        match self {
            CliError::Config(m) => ErrorRecord {
                error: "config",
                message: m,
            },
            CliError::Runtime(m) => ErrorRecord {
                error: "runtime",
                message: m,
            },
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'static str,
    message: &'a str,
}

pub(crate) fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

pub(crate) fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "ctxprobe", version, about = "Probe contextual embeddings by substitution and rerank distributional neighbors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank each key's related words in its test sentences, per layer.
    #[command(args_override_self = true)]
    Probe(ProbeArgs),
    /// P@1 by relation of a random ranker over the probe trials.
    #[command(args_override_self = true)]
    Baseline(BaselineArgs),
    /// Rerank static-embedding neighbors with contextual vectors.
    #[command(args_override_self = true)]
    Rerank(RerankArgs),
    /// Run rerank over a grid of settings and tabulate P@k.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Rebuild a rerank report, or print examples, from saved records.
    #[command(args_override_self = true)]
    Report(ReportArgs),
    /// Inspect or verify an encoding cache.
    #[command(subcommand)]
    Cache(CacheCommand),
    /// Serve the mock model over the line protocol on stdin/stdout.
    #[command(hide = true, args_override_self = true)]
    ServeMock(ServeMockArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// File of `key = value` lines supplying any flag; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mock, cache:<path>, remote:<url> or subprocess:<command>
    #[arg(long, default_value = "mock")]
    pub backend: String,
    /// Write-through encoding cache.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// The remote adapter accepts concurrent requests.
    #[arg(long)]
    pub pipelined: bool,
    /// "all", one layer, or a comma list, using the model's layer names.
    #[arg(long, default_value = "all")]
    pub layers: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parallel workers; output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value = "tsv", value_parser = parse_format)]
    pub format: ReportFormat,
    /// Output directory, created if missing.
    #[arg(long)]
    pub output: PathBuf,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn parse_strategy(s: &str) -> Result<SelectionStrategy, String> {
    s.parse()
}

fn parse_fusion(s: &str) -> Result<FusionMethod, String> {
    s.parse()
}

#[derive(Debug, Clone, Args)]
pub struct LexiconArgs {
    /// Relation lexicon (line-delimited `{key, sense, relation, target}`).
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Sense-tagged test sentences.
    #[arg(long)]
    pub sentences: PathBuf,
    /// Neighbor lists supplying dist targets (replaces dist entries of the lexicon).
    #[arg(long)]
    pub neighbors: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub per_relation_cap: usize,
    #[arg(long, default_value_t = 30)]
    pub wordnet_cap: usize,
    #[arg(long, default_value_t = 40)]
    pub total_cap: usize,
    /// Sentences kept per key sense.
    #[arg(long, default_value_t = 20)]
    pub sentence_cap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    /// Runs of the random baseline.
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "tsv", value_parser = parse_format)]
    pub format: ReportFormat,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RerankInputArgs {
    /// Static-embedding neighbor lists.
    #[arg(long)]
    pub neighbors: PathBuf,
    /// Raw corpus, one tokenized sentence per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Gold relation file (line-delimited `{key, relation, word}`).
    #[arg(long)]
    pub gold: PathBuf,
    /// Key frequencies for the high/low split.
    #[arg(long)]
    pub frequencies: Option<PathBuf>,
    /// Records of a reference run; cells get significance marks against it.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Neighbors reranked per key.
    #[arg(long, default_value_t = 15)]
    pub n: usize,
    /// Test sentences per word.
    #[arg(long, default_value_t = 10)]
    pub s: usize,
    /// Candidate pool per word.
    #[arg(long, default_value_t = 100)]
    pub n_sent: usize,
    #[arg(long, default_value_t = 10)]
    pub min_len: usize,
    #[arg(long, default_value_t = 90)]
    pub max_len: usize,
    #[arg(long, default_value = "random", value_parser = parse_strategy)]
    pub strategy: SelectionStrategy,
    #[arg(long, default_value = "average", value_parser = parse_fusion)]
    pub fusion: FusionMethod,
    #[arg(long, default_value_t = crate::rerank::RRF_K)]
    pub rrf_k: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RerankArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: RerankInputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepOver {
    /// Grid of neighbors reranked by sentences used.
    Ns,
    Fusion,
    Strategy,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: RerankInputArgs,
    #[arg(long, value_enum)]
    pub over: SweepOver,
    #[arg(long, default_value = "5,10,15")]
    pub n_values: String,
    #[arg(long, default_value = "5,10,15")]
    pub s_values: String,
    /// Column the others are tested against; defaults to n=10,s=10,
    /// average, or random depending on the sweep.
    #[arg(long)]
    pub reference_column: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rerank records to report on.
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub frequencies: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Print initial and reranked lists side by side instead.
    #[arg(long)]
    pub examples: bool,
    /// Words shown per list with --examples.
    #[arg(long, default_value_t = 10)]
    pub head: usize,
    /// Keys shown with --examples (comma list); all when absent.
    #[arg(long)]
    pub keys: Option<String>,
    #[arg(long, default_value = "tsv", value_parser = parse_format)]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Subcommand)]
pub enum CacheCommand {
    /// Record count, models and shape.
    Inspect {
        #[arg(long)]
        cache: PathBuf,
    },
    /// Check hashes, invariants and shape of every record.
    Verify {
        #[arg(long)]
        cache: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ServeMockArgs {
    /// Answer with an error for any request containing this token.
    #[arg(long)]
    pub fail_on: Option<String>,
}

/// Parse `key = value` lines into flags. `#` starts a comment; `true`
/// stands for a bare flag and `false` drops it.
pub fn config_file_args(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("{}:{}: expected `key = value`", path.display(), i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key == "config" {
            return Err(CliError::Config(format!("{}:{}: nested config", path.display(), i + 1)));
        }
        match value {
            "true" => out.push(OsString::from(format!("--{key}"))),
            "false" => {}
            v => {
                out.push(OsString::from(format!("--{key}")));
                out.push(OsString::from(v));
            }
        }
    }
    Ok(out)
}

/// Insert the config file's flags ahead of the explicit ones.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let extra = config_file_args(&path)?;
    let at = args
        .iter()
        .skip(1)
        .position(|a| a.to_string_lossy().starts_with('-'))
        .map_or(args.len(), |p| p + 1);
    let mut out = args[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

/// Run the command line `args` (program name first) and return the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let result = expand_config(args).and_then(|args| match Cli::try_parse_from(args) {
        Ok(cli) => commands::dispatch(cli),
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            Ok(())
        }
        Err(e) => Err(CliError::Config(e.to_string().trim_end().to_owned())),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let line = serde_json::to_string(&e.record()).expect("error record serializes");
            let _ = writeln!(std::io::stderr(), "{line}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_flags_go_before_explicit_ones() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        fs::write(&cfg, "# run\nseed = 7\nn_sent = 50\npipelined = true\nworkers=false\n").unwrap();
        let args = os(&["ctxprobe", "rerank", "--seed", "9", "--config", cfg.to_str().unwrap()]);
        let out = expand_config(args).unwrap();
        let s: Vec<String> = out.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(
            &s[..7],
            ["ctxprobe", "rerank", "--seed", "7", "--n-sent", "50", "--pipelined"]
        );
        assert_eq!(&s[7..9], ["--seed", "9"]);
    }

    #[test]
    fn explicit_flag_overrides_config() {
        let cli = Cli::try_parse_from(os(&[
            "ctxprobe", "probe", "--seed", "7", "--lexicon", "l", "--sentences", "s", "--output", "o",
            "--seed", "9",
        ]))
        .unwrap();
        let Command::Probe(p) = cli.command else { panic!() };
        assert_eq!(p.common.seed, 9);
    }

    #[test]
    fn bad_config_line() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.conf");
        fs::write(&cfg, "seed 7\n").unwrap();
        assert!(matches!(config_file_args(&cfg), Err(CliError::Config(_))));
    }
}
