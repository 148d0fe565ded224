//! `wae`: ingest dumps, build the anchor-extraction corpus, convert task
//! data, check the scoring head and score predictions.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "wae", version, about = "Wiki anchor extraction toolkit")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the effective configuration here before running.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    log_level: Option<String>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a dump into segmented article records (JSON lines).
    Ingest(IngestArgs),
    /// Count inbound links per target from article records.
    Index(IndexArgs),
    /// Build the corpus and its train/dev split.
    BuildCorpus(BuildArgs),
    /// Count examples, answerability, words and entities of a corpus.
    Stats(StatsArgs),
    /// Split a corpus by reserving definition articles for dev.
    SplitDev(SplitArgs),
    /// Convert NER, QA or classification data to MRC examples.
    ConvertTask(ConvertArgs),
    /// Check the scoring head against brute-force oracles.
    Selftest(SelftestArgs),
    /// Fit the toy encoder and head on a generated micro-corpus.
    DemoTrain(TrainArgs),
    /// Score predictions against gold data.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Abort on the first malformed record.
    #[arg(long)]
    strict: bool,
    /// Write ingestion counters as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IndexArgs {
    /// Article records from `ingest`, or a raw dump.
    #[arg(long)]
    articles: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON object mapping alternate titles to canonical ones.
    #[arg(long)]
    aliases: Option<PathBuf>,
    /// Keep only targets linked from at least this many articles.
    #[arg(long)]
    inlink_min: Option<usize>,
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Raw dump or article records.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// random, rel-top-p, rel-top-pct, q-div or c-div.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    w: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    min_query_words: Option<usize>,
    #[arg(long)]
    n_ans: Option<usize>,
    #[arg(long)]
    n_unans: Option<usize>,
    #[arg(long)]
    inlink_min: Option<usize>,
    #[arg(long)]
    dev_entities: Option<usize>,
    #[arg(long)]
    anonymize_threshold: Option<f64>,
    /// Allow unanswerable contexts that spell out the entity title.
    #[arg(long)]
    keep_title_matches: bool,
    #[arg(long)]
    aliases: Option<PathBuf>,
    /// Context vectors for c-div, JSON lines.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Write the counts here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dev_entities: Option<usize>,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// ner, eqa, mcqa, paircls or sentcls.
    #[arg(long)]
    kind: String,
    /// JSON object mapping label to description (NER) or query (classification).
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write display rows, one per example.
    #[arg(long)]
    render: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    examples: Option<usize>,
    #[arg(long)]
    unanswerable: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Global gradient norm cap (0 disables clipping).
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    log_every: Option<usize>,
    /// Write the training log and final metrics as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// ner, eqa, mcqa, paircls, sentcls or rationale.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    pred: PathBuf,
    /// Gold task data; for rationale, optional judgments (JSON id -> bool).
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
    /// Rationale review sheet output (JSON lines).
    #[arg(long)]
    sheet: Option<PathBuf>,
}

/// Error classes mapped to exit codes: input problems exit 1, violated
/// invariants and non-finite numbers exit 2.
#[derive(Debug)]
pub struct Invariant(pub String);

impl std::fmt::Display for Invariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invariant violated: {}", self.0)
    }
}

impl std::error::Error for Invariant {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Invariant>().is_some() {
        return 2;
    }
    match err.downcast_ref::<wae_core::Error>() {
        Some(wae_core::Error::NonFinite(_) | wae_core::Error::Shape(_) | wae_core::Error::IllegalTarget(..)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cli.log_level.is_some() {
        cfg.log_level = cli.log_level.clone();
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let level = cfg.log_level.clone().unwrap_or_else(|| "info".into());
    env_logger::Builder::new().parse_filters(&level).target(env_logger::Target::Stderr).try_init().ok();
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().ok();
    }
    commands::run(cli.command, cfg, cli.save_config.as_deref())
}
