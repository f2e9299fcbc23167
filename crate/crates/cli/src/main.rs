mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use fds_core::{ErrorKind, Hyperparams};

/// Functional distributional semantics: train and query semantic-function
/// models over lexicalised dependency graphs.
///
/// Every subcommand accepts `--config FILE` with `key = value` lines; keys
/// are long flag names. Flags on the command line override the file.
#[derive(Debug, Parser)]
#[command(name = "fds", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a raw corpus by predicate frequency and write tokens, vocabulary and stats.
    Preprocess(PreprocessArgs),
    /// Train a model (or resume a checkpoint).
    Train(TrainArgs),
    /// Correlate predicate cosines with a word-pair similarity dataset.
    Eval(EvalArgs),
    /// Similarity, neighbour and slot-filling queries.
    Query(QueryArgs),
    /// Generate lexicalised graphs from the model.
    Sample(SampleArgs),
    /// Convert the SimLex-999 distribution file to `word1<TAB>word2<TAB>score`.
    ConvertSimlex(ConvertSimlexArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// `.jsonl`/`.json` files are graphs, anything else triples.
    Auto,
    /// `verb<TAB>arg1<TAB>arg2`, `_` for a missing argument.
    Triples,
    /// JSON lines `{"nodes": [...], "links": [[src, label, tgt], ...]}`.
    Graphs,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Run configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Raw corpus.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
    /// Minimum predicate count, enforced to a fixed point.
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    /// Output token file (JSON lines).
    #[arg(long, value_name = "FILE")]
    pub tokens: PathBuf,
    /// Output vocabulary (`predicate<TAB>count`).
    #[arg(long, value_name = "FILE")]
    pub vocab: PathBuf,
    /// Also write the stats table here.
    #[arg(long, value_name = "FILE")]
    pub stats: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitMode {
    Random,
    Pretrained,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Token file written by `preprocess`.
    #[arg(long, value_name = "FILE")]
    pub tokens: PathBuf,
    /// Vocabulary written by `preprocess` (taken from the checkpoint on resume).
    #[arg(long, value_name = "FILE", required_unless_present = "resume")]
    pub vocab: Option<PathBuf>,
    /// Output model; the training state goes to `<FILE>.state`.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Continue from a checkpoint. Its hyperparameters apply unless set explicitly.
    #[arg(long, value_name = "FILE")]
    pub resume: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InitMode::Random)]
    pub init: InitMode,
    /// Pre-trained vectors (`predicate<TAB>v1 v2 ...`), for `--init pretrained`.
    #[arg(long, value_name = "FILE", required_if_eq("init", "pretrained"))]
    pub pretrained: Option<PathBuf>,
    /// Entity space dimensionality N.
    #[arg(long, default_value_t = 400)]
    pub dims: usize,
    /// Active units per entity C.
    #[arg(long, default_value_t = 40)]
    pub cardinality: usize,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Write a checkpoint every N batches (0 = only at the end).
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub checkpoint_every: u64,
    /// Stop after N batches, leaving a resumable checkpoint.
    #[arg(long, value_name = "N")]
    pub max_batches: Option<u64>,
    /// Print one line per batch to stderr:
    /// `epoch batch acc_entity acc_pred mean_truth link_norm pred_norm`.
    #[arg(long)]
    pub progress: bool,
}

fn hp_default() -> Hyperparams {
    Hyperparams::default()
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    #[arg(long, default_value_t = hp_default().learning_rate)]
    pub learning_rate: f64,
    /// Decay of the squared-gradient sums (1 = plain AdaGrad).
    #[arg(long, default_value_t = hp_default().adagrad_decay)]
    pub adagrad_decay: f64,
    #[arg(long, default_value_t = hp_default().adagrad_epsilon)]
    pub adagrad_epsilon: f64,
    #[arg(long, default_value_t = hp_default().l1)]
    pub l1: f64,
    #[arg(long, default_value_t = hp_default().l2)]
    pub l2: f64,
    #[arg(long, default_value_t = hp_default().batch_size)]
    pub batch_size: usize,
    /// Fantasy particles.
    #[arg(long, default_value_t = hp_default().n_particles)]
    pub particles: usize,
    /// Particle sweeps per batch.
    #[arg(long, default_value_t = hp_default().particle_sweeps_per_batch)]
    pub particle_sweeps: usize,
    /// MH steps per latent variable per batch.
    #[arg(long, default_value_t = hp_default().steps_per_variable)]
    pub steps_per_variable: usize,
    /// Scale of the average-predicate approximation in entity steps.
    #[arg(long, default_value_t = hp_default().z_ratio_k)]
    pub z_ratio_k: f64,
    /// Use the exact choice normaliser in entity steps.
    #[arg(long)]
    pub exact_z_ratio: bool,
    #[arg(long, default_value_t = hp_default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = hp_default().seed)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Similarity {
    /// Cosine over predicate weights and bias.
    WithBias,
    /// Cosine over predicate weights only.
    WeightsOnly,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Trained model (`.json` or binary).
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Pairs as `word1<TAB>word2<TAB>score`.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Similarity::WithBias)]
    pub similarity: Similarity,
    /// Print the full report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Run configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Trained model (`.json` or binary).
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Similarity::WithBias)]
    pub similarity: Similarity,
    /// Predicates listed by `fill`.
    #[arg(long, global = true, default_value_t = 10)]
    pub top: usize,
    /// Sampling budget for `fill` when the graph is too large to enumerate.
    #[arg(long, global = true, default_value_t = 20_000)]
    pub samples: usize,
    /// Always sample in `fill`, even when enumeration is feasible.
    #[arg(long, global = true)]
    pub force_sampling: bool,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[command(subcommand)]
    pub query: Query,
}

#[derive(Debug, Subcommand)]
pub enum Query {
    /// Cosine similarity of two predicates.
    Sim { first: String, second: String },
    /// The K most similar predicates.
    Neighbors { word: String, k: usize },
    /// Posterior over the predicate at the `?` node, e.g. `fill chase ARG1=dog ARG2=?`.
    /// The head is linked to each argument; `?` may also stand for the head.
    Fill {
        head: String,
        #[arg(value_name = "LABEL=WORD", required = true)]
        args: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Run configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Trained model (`.json` or binary).
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Graph shape: svo, sv, vo or single.
    #[arg(long, default_value = "svo")]
    pub shape: String,
    /// Particle sweeps before the first sample.
    #[arg(long, default_value_t = 100)]
    pub burnin: usize,
    /// Graphs to emit (JSON lines on stdout).
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ConvertSimlexArgs {
    /// Run configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// SimLex-999 text file.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Output file (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn command() -> clap::Command {
    let mut cmd = Cli::command();
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    cmd
}

enum Parsed {
    Run(Box<Cli>, ArgMatches),
    Exit(ExitCode),
}

fn clap_exit(e: clap::Error) -> Parsed {
    let _ = e.print();
    Parsed::Exit(if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn parse(argv: Vec<OsString>) -> Parsed {
    let cmd = command();
    let first = match cmd.clone().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return clap_exit(e),
    };
    let Some((name, sub)) = first.subcommand() else {
        return Parsed::Exit(ExitCode::from(1));
    };
    let matches = match sub.get_one::<PathBuf>("config") {
        None => first.clone(),
        Some(path) => {
            let sub_cmd = cmd.find_subcommand(name).expect("parsed subcommand exists");
            let injected = match config::load_config(path).and_then(|e| config::entries_to_args(sub_cmd, &e)) {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Parsed::Exit(exit_code(e.kind()));
                }
            };
            let at = argv.iter().skip(1).position(|a| a == name).map_or(argv.len(), |i| i + 2);
            let mut full: Vec<OsString> = argv[..at].to_vec();
            full.extend(injected);
            full.extend_from_slice(&argv[at..]);
            match cmd.try_get_matches_from(full) {
                Ok(m) => m,
                Err(e) => return clap_exit(e),
            }
        }
    };
    match Cli::from_arg_matches(&matches) {
        Ok(cli) => Parsed::Run(Box::new(cli), matches),
        Err(e) => clap_exit(e),
    }
}

fn exit_code(kind: ErrorKind) -> ExitCode {
    match kind {
        ErrorKind::Usage => ExitCode::from(1),
        ErrorKind::Data => ExitCode::from(2),
        ErrorKind::Numeric => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let (cli, matches) = match parse(std::env::args_os().collect()) {
        Parsed::Run(cli, m) => (cli, m),
        Parsed::Exit(code) => return code,
    };
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand present");
    match commands::run(cli.command, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}
