mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Serialize;
use toklab::vocab::{Algorithm, TrainFlags, MODEL_FORMAT_VERSION};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "toklab",
    about = "Train subword tokenizers and relate their segmentations to lexical decision data",
    disable_version_flag = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Cmd>,

    /// `key = value` file of option defaults; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads; 1 runs everything sequentially, 0 uses all cores.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Seed for every random choice (splits, synthetic data).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,

    /// Print tool and model-format versions.
    #[arg(long)]
    #[serde(skip)]
    pub version: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cmd {
    /// Train a tokenizer on one or more corpora.
    Train(TrainArgs),
    /// Print the tokens of each sequence.
    Encode(EncodeArgs),
    /// Write per-stimulus token counts and chunkability.
    Chunk(ChunkArgs),
    /// Correlate segmentation metrics with response times and accuracies.
    Eval(EvalArgs),
    /// Train and evaluate over a grid of vocabulary sizes.
    Sweep(SweepArgs),
    /// Morpheme coverage of one or more vocabularies.
    Morph(MorphArgs),
    /// Hold-out regression of chunkability against word frequency.
    Regress(RegressArgs),
    /// Convert an external vocabulary into a model file.
    Import(ImportArgs),
    /// Generate a synthetic corpus, stimuli, frequency norms and morphemes.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct TrainOpts {
    /// Keep letter case (default: lowercase everything).
    #[arg(long)]
    pub no_lowercase: bool,
    /// Longest token a merge may create, in characters.
    #[arg(long, default_value_t = 32)]
    pub max_token_len: usize,
    /// UnigramLM seed lexicon size as a multiple of the target.
    #[arg(long, default_value_t = 10)]
    pub seed_factor: usize,
    /// UnigramLM EM rounds between prunes.
    #[arg(long, default_value_t = 2)]
    pub em_iters: usize,
    /// Share of UnigramLM tokens pruned per round.
    #[arg(long, default_value_t = 0.25)]
    pub prune_fraction: f64,
    /// Longest UnigramLM seed substring.
    #[arg(long, default_value_t = 20)]
    pub max_piece_len: usize,
    /// Fewest occurrences of a UnigramLM seed substring.
    #[arg(long, default_value_t = 2)]
    pub min_piece_count: u64,
    /// Read at most this many sentences per corpus.
    #[arg(long)]
    pub limit: Option<usize>,
}

impl TrainOpts {
    pub fn flags(&self, seed: u64) -> TrainFlags {
        TrainFlags {
            lowercase: !self.no_lowercase,
            seed,
            max_token_len: self.max_token_len,
            seed_factor: self.seed_factor,
            em_iters: self.em_iters,
            prune_fraction: self.prune_fraction,
            max_piece_len: self.max_piece_len,
            min_piece_count: self.min_piece_count,
        }
    }
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct DataOpts {
    /// Lexical decision file (CSV or TSV with a header).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "sequence")]
    pub col_sequence: String,
    #[arg(long, default_value = "is_word")]
    pub col_is_word: String,
    #[arg(long, default_value = "rt")]
    pub col_rt: String,
    #[arg(long, default_value = "accuracy")]
    pub col_accuracy: String,
    /// Drop response times at or beyond these percentiles, e.g. `1,99`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub rt_percentiles: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_algo)]
    pub algo: Algorithm,
    #[arg(long)]
    pub vocab_size: usize,
    /// Corpus files, one sentence per line.
    #[arg(long, required = true, value_delimiter = ',')]
    pub corpus: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// File with one sequence per line (instead of positional sequences).
    #[arg(long)]
    pub input: Option<PathBuf>,
    pub sequences: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct ChunkArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Stimulus file.
    #[arg(long = "input")]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "sequence")]
    pub col_sequence: String,
    #[arg(long, default_value = "is_word")]
    pub col_is_word: String,
    #[arg(long, default_value = "rt")]
    pub col_rt: String,
    #[arg(long, default_value = "accuracy")]
    pub col_accuracy: String,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Model files; `id=path` names the tokenizer in the report.
    #[arg(long, value_delimiter = ',', required_unless_present = "from_metrics")]
    pub model: Vec<String>,
    #[command(flatten)]
    pub data: Option<DataOpts>,
    /// Recompute the report from a per-stimulus metrics file.
    #[arg(long, conflicts_with_all = ["model", "data"])]
    pub from_metrics: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "chunkability,num-tokens,length")]
    pub metrics: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "rt,acc")]
    pub signals: Vec<String>,
    /// Dataset label for report rows (default: data file stem).
    #[arg(long)]
    pub dataset: Option<String>,
    /// Report JSON; a CSV mirror and the metrics file are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_algo)]
    pub algo: Algorithm,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, required = true, value_delimiter = ',')]
    pub corpus: Vec<PathBuf>,
    #[command(flatten)]
    pub data: DataOpts,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "chunkability,num-tokens,length")]
    pub metrics: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "rt,acc")]
    pub signals: Vec<String>,
    #[arg(long)]
    pub dataset: Option<String>,
    /// Sweep JSON; a CSV mirror is written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct MorphArgs {
    /// Model files.
    #[arg(long, required = true, value_delimiter = ',')]
    pub model: Vec<PathBuf>,
    /// Morpheme annotation file (`word<TAB>m1|m2<TAB>t1|t2`).
    #[arg(long)]
    pub morphemes: PathBuf,
    /// Keep affixes found in at least this share of annotated words.
    #[arg(long, default_value_t = 0.001)]
    pub min_share: f64,
    /// Also evaluate merge-based models truncated to these sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RegressArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataOpts,
    /// Word frequency file (`word<TAB>zipf`).
    #[arg(long)]
    pub freq: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ImportArgs {
    /// `wordpiece-list` or `bpe-merges`.
    #[arg(long)]
    pub format: String,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_lowercase: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub sentences: usize,
    #[arg(long, default_value_t = 2_000)]
    pub stems: usize,
    /// Words and non-words each.
    #[arg(long, default_value_t = 500)]
    pub stimuli: usize,
    /// Size of the BPE model whose chunkability drives the responses.
    #[arg(long, default_value_t = 2_000)]
    pub reference_size: usize,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse::<Algorithm>().map_err(|e| e.to_string())
}

fn version_text() -> String {
    format!(
        "toklab {} (model format {MODEL_FORMAT_VERSION})",
        env!("CARGO_PKG_VERSION")
    )
}

fn run(args: Vec<OsString>) -> u8 {
    let command = Cli::command();
    let args = match config::merge(args, &command) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    if cli.version {
        println!("{}", version_text());
        return 0;
    }
    if cli.command.is_none() {
        let _ = Cli::command().print_help();
        return EXIT_USAGE;
    }
    match commands::execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os().collect()))
}
