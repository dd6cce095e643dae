use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hybrid_hash::{Aggregation, HashConfig, HashLayout, ModelHead, Scheme};

#[derive(Debug, Parser)]
#[command(name = "hhash", version, about = "Hybrid frequency + double hashing for sparse-feature embeddings")]
pub struct Cli {
    /// `key = value` file with defaults for the subcommand's flags.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic train/eval event files with a known ground truth.
    Gen(GenArgs),
    /// Count features in an event file and write a top-k dictionary.
    BuildDict(BuildDictArgs),
    /// Table sizes, complexity classes and analytic collision rates.
    Analyze(AnalyzeArgs),
    /// Monte Carlo collision counts for random keys.
    Simulate(SimulateArgs),
    /// Train and evaluate models over a sweep of table shapes.
    Train(TrainArgs),
    /// Evaluate a saved model on an event file.
    Eval(EvalArgs),
    /// Lookup or training throughput per hashing scheme.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Kv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopK {
    Global,
    PerNamespace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMode {
    /// Embedding lookups per second.
    Lookup,
    /// SGD steps per second.
    Train,
}

/// Non-negative integer, also accepted in scientific notation (`4e6`).
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= 2f64.powi(53)) {
        return Err(format!("{s:?} is not a non-negative integer"));
    }
    Ok(v as u64)
}

/// Decimal or `0x`-prefixed hexadecimal 64-bit value.
pub fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| format!("{s:?} is not a 64-bit decimal or 0x-hex value"))
}

fn parse_bits(s: &str) -> Result<u32, String> {
    let b: u32 = s.parse().map_err(|_| format!("{s:?} is not an integer"))?;
    HashConfig::with_default_seeds(b).map_err(|e| e.to_string())?;
    Ok(b)
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("{s:?} is not a positive integer")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    /// Seed of the first hash function; also keys the dictionary index.
    #[arg(long, value_parser = parse_seed, default_value_t = HashConfig::DEFAULT_SEED1)]
    pub seed1: u64,
    /// Seed of the second hash function.
    #[arg(long, value_parser = parse_seed, default_value_t = HashConfig::DEFAULT_SEED2)]
    pub seed2: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Training events.
    #[arg(long, value_parser = parse_count, default_value = "10000")]
    pub events: u64,
    /// Evaluation events, drawn after the training events. Defaults to a
    /// fifth of `--events`.
    #[arg(long, value_parser = parse_count)]
    pub eval_events: Option<u64>,
    /// Seeds the ground-truth weights and the event stream.
    #[arg(long, value_parser = parse_seed, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Sparse namespace `name:vocab:exponent[:per_event]`. Repeatable;
    /// defaults to user:30000:1.05, ad:10000:1.1, site:3000:1.2.
    #[arg(long = "namespace", value_name = "SPEC", value_delimiter = ',')]
    pub namespaces: Vec<String>,
    /// Continuous namespace drawn from a standard normal. Repeatable.
    #[arg(long = "dense", value_name = "NAME", value_delimiter = ',')]
    pub dense: Vec<String>,
    /// Ground-truth intercept.
    #[arg(long, default_value_t = -1.5, allow_negative_numbers = true)]
    pub bias: f64,
    /// Standard deviation of the ground-truth weights.
    #[arg(long, default_value_t = 1.5)]
    pub weight_scale: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BuildDictArgs {
    /// Event file to count.
    #[arg(long)]
    pub input: PathBuf,
    /// Dictionary size.
    #[arg(long, value_parser = parse_count)]
    pub k: u64,
    #[arg(long, value_parser = parse_bits, default_value_t = 20)]
    pub bits: u32,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Percentile bins per continuous namespace.
    #[arg(long, value_parser = parse_positive, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = TopK::Global)]
    pub top_k: TopK,
    /// Warn about and skip malformed lines instead of failing.
    #[arg(long)]
    pub skip_bad_lines: bool,
    #[arg(long, value_enum, default_value_t = Format::Kv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Distinct features.
    #[arg(long, value_parser = parse_count)]
    pub n: u64,
    #[arg(long, value_parser = parse_bits)]
    pub bits: u32,
    /// Dictionary size for the frequency-backed schemes.
    #[arg(long, value_parser = parse_count, default_value = "0")]
    pub k: u64,
    #[arg(long, value_delimiter = ',', default_value = "regular,double,frequency,hybrid")]
    pub schemes: Vec<Scheme>,
    #[arg(long, value_parser = parse_positive, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, alias = "scheme", value_delimiter = ',', default_value = "regular")]
    pub schemes: Vec<Scheme>,
    #[arg(long, value_parser = parse_count)]
    pub n: u64,
    #[arg(long, value_parser = parse_bits)]
    pub bits: u32,
    /// Keys covered by the dictionary (hybrid only).
    #[arg(long, value_parser = parse_count, default_value = "0")]
    pub k: u64,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Seed of the first run's key stream; run `r` uses `key_seed + r`.
    #[arg(long, value_parser = parse_seed, default_value_t = 0)]
    pub key_seed: u64,
    #[arg(long, value_parser = parse_positive, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[arg(long, value_delimiter = ',', default_value = "hybrid")]
    pub schemes: Vec<Scheme>,
    /// Dictionary sizes to sweep.
    #[arg(long, value_delimiter = ',', value_parser = parse_count, default_value = "10000")]
    pub k: Vec<u64>,
    /// Hash table sizes (`B = 2^bits`) to sweep.
    #[arg(long, value_delimiter = ',', value_parser = parse_bits, default_value = "16")]
    pub bits: Vec<u32>,
    #[arg(long, value_parser = parse_positive, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value = "sum")]
    pub aggregation: Aggregation,
    #[arg(long, default_value = "shared")]
    pub layout: HashLayout,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, value_enum, default_value_t = TopK::Global)]
    pub top_k: TopK,
    /// Use this dictionary instead of counting the training file; replaces `--k`.
    #[arg(long)]
    pub dict: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub eval: Option<PathBuf>,
    #[command(flatten)]
    pub table: TableArgs,
    /// Percentile bins per continuous namespace.
    #[arg(long, value_parser = parse_positive, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value_t = 0.001, allow_negative_numbers = true)]
    pub lr: f64,
    #[arg(long, value_parser = parse_positive, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    /// `linear` or `hidden:N`.
    #[arg(long, default_value = "linear")]
    pub head: ModelHead,
    /// Seeds table and head initialization and the shuffle.
    #[arg(long, value_parser = parse_seed, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_shuffle: bool,
    /// Runs per configuration with seeds `seed, seed + 1, ...`; reports
    /// mean±std when above one.
    #[arg(long, value_parser = parse_positive, default_value_t = 1)]
    pub repeat: usize,
    /// Also train a frequency table over the whole training vocabulary and
    /// report parameter ratios against it.
    #[arg(long)]
    pub baseline: bool,
    /// Save the trained model (single configuration, single run only).
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Where the saved model's dictionary goes; defaults to `<model-out>.dict`.
    #[arg(long)]
    pub dict_out: Option<PathBuf>,
    #[arg(long)]
    pub skip_bad_lines: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Dictionary the model was trained with; required when it has one.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Base click rate for RCE. Defaults to the label mean of `--data`.
    #[arg(long, allow_negative_numbers = true)]
    pub base_rate: Option<f64>,
    /// Write one predicted probability per line.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub skip_bad_lines: bool,
    #[arg(long, value_enum, default_value_t = Format::Kv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = BenchMode::Lookup)]
    pub mode: BenchMode,
    #[arg(long, value_delimiter = ',', default_value = "regular,double,hybrid")]
    pub schemes: Vec<Scheme>,
    /// Keys in the stream (lookup) or events in the dataset (train).
    #[arg(long, value_parser = parse_count, default_value = "200000")]
    pub keys: u64,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub vocab: u64,
    /// Zipf exponent of the key stream.
    #[arg(long, default_value_t = 1.1)]
    pub zipf: f64,
    #[arg(long, value_parser = parse_bits, default_value_t = 18)]
    pub bits: u32,
    #[arg(long, value_parser = parse_count, default_value = "10000")]
    pub k: u64,
    /// Size the dictionary to hold this share of the stream; overrides `--k`.
    #[arg(long)]
    pub coverage: Option<f64>,
    #[arg(long, value_parser = parse_positive, default_value_t = 16)]
    pub dim: usize,
    /// Passes over the stream per timed trial.
    #[arg(long, value_parser = parse_positive, default_value_t = 3)]
    pub iterations: usize,
    /// Untimed passes before the first trial.
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    #[arg(long, default_value_t = 7)]
    pub trials: usize,
    #[arg(long, value_parser = parse_positive, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, value_parser = parse_seed, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}
