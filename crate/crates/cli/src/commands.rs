use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wae_core::corpus::{
    build_corpus, contains_title, corpus_stats, read_examples, split_dev, write_examples, BuildStats, ContextVectors,
    CorpusStats, PairingStrategy,
};
use wae_core::eval::{cls_report, eqa_report, ner_report, rationale_report, EvalReport, Rationale};
use wae_core::example::MrcExample;
use wae_core::head::{demo_train, synthetic_corpus};
use wae_core::ingest::{
    build_inlink_index_par, process_article, write_article, AliasTable, Article, DumpReader, IngestStats, ParseMode,
    Segmenter,
};
use wae_core::selftest::run_selftest;
use wae_core::tasks::{
    choice_tag, read_cls_jsonl, read_conll, read_eqa, read_tasks, render_row, to_mrc, Entity, LabelSchema,
    TaskInstance, TaskKind,
};

use crate::config::RunConfig;
use crate::{
    BuildArgs, Command, ConvertArgs, EvalArgs, IndexArgs, IngestArgs, Invariant, SelftestArgs, SplitArgs, StatsArgs,
    TrainArgs,
};

const BATCH: usize = 256;

pub fn run(command: Command, mut cfg: RunConfig, save: Option<&Path>) -> Result<()> {
    merge(&command, &mut cfg)?;
    if let Some(path) = save {
        cfg.save(path)?;
    }
    match command {
        Command::Ingest(a) => ingest(a, &cfg),
        Command::Index(a) => index(a, &cfg),
        Command::BuildCorpus(a) => build(a, &cfg),
        Command::Stats(a) => stats(a),
        Command::SplitDev(a) => split(a, &cfg),
        Command::ConvertTask(a) => convert(a),
        Command::Selftest(a) => selftest(a, &cfg),
        Command::DemoTrain(a) => train(a, &cfg),
        Command::Eval(a) => eval(a),
    }
}

/// Folds subcommand flags into the configuration.
fn merge(command: &Command, cfg: &mut RunConfig) -> Result<()> {
    let seed = cfg.seed();
    cfg.builder.seed = seed;
    cfg.train.seed = seed;
    cfg.selftest.seed = seed;
    match command {
        Command::Ingest(a) => {
            set(&mut cfg.dump, &a.dump);
            set(&mut cfg.out, &a.out);
            cfg.strict |= a.strict;
        }
        Command::Index(a) => {
            set(&mut cfg.aliases, &a.aliases);
            if let Some(n) = a.inlink_min {
                cfg.builder.inlink_threshold = n;
            }
        }
        Command::BuildCorpus(a) => {
            set(&mut cfg.dump, &a.dump);
            set(&mut cfg.out, &a.out);
            set(&mut cfg.aliases, &a.aliases);
            set(&mut cfg.vectors, &a.vectors);
            cfg.strict |= a.strict;
            let b = &mut cfg.builder;
            if let Some(kind) = &a.strategy {
                b.strategy = PairingStrategy::parse(kind, a.p)?;
            } else if a.p.is_some() {
                b.strategy = PairingStrategy::parse(b.strategy.name(), a.p)?;
            }
            macro_rules! over {
                ($($field:ident <- $flag:ident),*) => { $( if let Some(v) = a.$flag { b.$field = v; } )* };
            }
            over!(window <- w, query_sentences <- t, query_min_words <- min_query_words,
                answerable_per_entity <- n_ans, unanswerable_per_entity <- n_unans,
                inlink_threshold <- inlink_min, dev_entities <- dev_entities,
                anonymize_threshold <- anonymize_threshold);
            if a.keep_title_matches {
                b.exclude_title_matches = false;
            }
            b.validate()?;
        }
        Command::SplitDev(a) => {
            if let Some(n) = a.dev_entities {
                cfg.builder.dev_entities = n;
            }
        }
        Command::DemoTrain(a) => {
            let t = &mut cfg.train;
            macro_rules! over {
                ($($field:ident <- $flag:ident),*) => { $( if let Some(v) = a.$flag { t.$field = v; } )* };
            }
            over!(examples <- examples, unanswerable <- unanswerable, steps <- steps,
                learning_rate <- lr, max_grad_norm <- clip, dim <- dim, hidden_dim <- hidden, log_every <- log_every);
            if t.unanswerable > t.examples {
                bail!(wae_core::Error::InvalidInput("more unanswerable examples than examples".into()));
            }
        }
        Command::Stats(_) | Command::ConvertTask(_) | Command::Selftest(_) | Command::Eval(_) => {}
    }
    Ok(())
}

fn set(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| anyhow!(wae_core::Error::InvalidInput(format!("missing --{flag}"))))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::with_capacity(1 << 20, f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::with_capacity(1 << 20, f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load_aliases(path: Option<&Path>) -> Result<AliasTable> {
    match path {
        None => Ok(AliasTable::default()),
        Some(p) => {
            let map: HashMap<String, String> =
                serde_json::from_reader(open(p)?).with_context(|| format!("parsing aliases {}", p.display()))?;
            Ok(AliasTable::new(map))
        }
    }
}

fn parse_mode(strict: bool) -> ParseMode {
    if strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

/// Streams the dump in batches, processing each batch on the worker pool
/// and handing articles to `sink` in input order.
fn stream_articles(path: &Path, strict: bool, mut sink: impl FnMut(Article) -> Result<()>) -> Result<IngestStats> {
    let mut reader = DumpReader::new(open(path)?, parse_mode(strict))?;
    let segmenter = Segmenter::default();
    let mut stats = IngestStats::default();
    let mut batch = Vec::with_capacity(BATCH);
    loop {
        batch.clear();
        for raw in reader.by_ref().take(BATCH) {
            batch.push(raw?);
        }
        if batch.is_empty() {
            break;
        }
        let done: Vec<(Article, usize)> =
            std::mem::take(&mut batch).into_par_iter().map(|raw| process_article(raw, &segmenter)).collect();
        for (article, dropped) in done {
            stats.articles += 1;
            stats.anchors += article.anchors.len();
            stats.dropped_anchors += dropped;
            sink(article)?;
        }
    }
    stats.skipped_records = reader.skipped();
    Ok(stats)
}

fn load_articles(path: &Path, strict: bool) -> Result<(Vec<Article>, IngestStats)> {
    let mut out = Vec::new();
    let stats = stream_articles(path, strict, |a| {
        out.push(a);
        Ok(())
    })?;
    Ok((out, stats))
}

fn ingest(_: IngestArgs, cfg: &RunConfig) -> Result<()> {
    let dump = required(&cfg.dump, "dump")?;
    let out = required(&cfg.out, "out")?;
    let mut w = create(out)?;
    let stats = stream_articles(dump, cfg.strict, |a| Ok(write_article(&mut w, &a)?))?;
    w.flush()?;
    log::info!(
        "ingested {} articles, {} anchors ({} dropped), {} malformed records skipped",
        stats.articles,
        stats.anchors,
        stats.dropped_anchors,
        stats.skipped_records
    );
    Ok(())
}

fn index(a: IndexArgs, cfg: &RunConfig) -> Result<()> {
    let (articles, _) = load_articles(&a.articles, cfg.strict)?;
    let aliases = load_aliases(cfg.aliases.as_deref())?;
    let index = build_inlink_index_par(&articles, &aliases);
    let threshold = a.inlink_min.unwrap_or(0);
    let kept: BTreeMap<&String, _> = index.eligible(threshold).collect();
    log::info!("{} targets, {} linked from at least {} articles", index.len(), kept.len(), threshold);
    write_json(&a.out, &kept)
}

#[derive(Debug, Serialize, Deserialize)]
struct BuildReport {
    ingest: IngestStats,
    build: BuildStats,
    corpus: CorpusStats,
    train: CorpusStats,
    dev: CorpusStats,
}

/// Checks the properties every built example must have.
fn verify_corpus(examples: &[MrcExample], title_filter: bool) -> Result<()> {
    for e in examples {
        e.check_alignment().map_err(|err| Invariant(err.to_string()))?;
        e.check_answerability().map_err(|err| Invariant(err.to_string()))?;
        if !e.answerable && title_filter && contains_title(&e.context, &e.entity) {
            return Err(Invariant(format!("{}: unanswerable context mentions {:?}", e.id, e.entity)).into());
        }
    }
    Ok(())
}

fn write_corpus(path: &Path, examples: &[MrcExample]) -> Result<()> {
    let mut w = create(path)?;
    write_examples(&mut w, examples)?;
    w.flush()?;
    Ok(())
}

fn build(_: BuildArgs, cfg: &RunConfig) -> Result<()> {
    let dump = required(&cfg.dump, "dump")?;
    let out = required(&cfg.out, "out")?;
    let (articles, ingest) = load_articles(dump, cfg.strict)?;
    let aliases = load_aliases(cfg.aliases.as_deref())?;
    let vectors = match &cfg.vectors {
        Some(p) => Some(ContextVectors::read(open(p)?)?),
        None => None,
    };
    let index = build_inlink_index_par(&articles, &aliases);
    let (examples, build) = build_corpus(&articles, &index, &aliases, &cfg.builder, vectors.as_ref())?;
    verify_corpus(&examples, cfg.builder.exclude_title_matches)?;
    let corpus = corpus_stats(&examples);
    write_corpus(&out.join("corpus.jsonl"), &examples)?;
    let (train, dev) = split_dev(examples, cfg.builder.dev_entities, cfg.builder.seed)?;
    write_corpus(&out.join("train.jsonl"), &train)?;
    write_corpus(&out.join("dev.jsonl"), &dev)?;
    let report = BuildReport { ingest, build, corpus, train: corpus_stats(&train), dev: corpus_stats(&dev) };
    write_json(&out.join("stats.json"), &report)?;
    log::info!(
        "{} examples ({} answerable, {} unanswerable) for {} entities; train {}, dev {}",
        corpus.examples,
        corpus.answerable,
        corpus.unanswerable,
        corpus.entities,
        report.train.examples,
        report.dev.examples
    );
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let examples = read_examples(open(&a.corpus)?)?;
    let s = corpus_stats(&examples);
    match &a.out {
        Some(p) => write_json(p, &s),
        None => {
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(())
        }
    }
}

fn split(a: SplitArgs, cfg: &RunConfig) -> Result<()> {
    let examples = read_examples(open(&a.corpus)?)?;
    let (train, dev) = split_dev(examples, cfg.builder.dev_entities, cfg.seed())?;
    write_corpus(&a.out.join("train.jsonl"), &train)?;
    write_corpus(&a.out.join("dev.jsonl"), &dev)?;
    log::info!("train {} examples, dev {}", train.len(), dev.len());
    Ok(())
}

fn convert(a: ConvertArgs) -> Result<()> {
    let kind = TaskKind::parse(&a.kind)?;
    let schema = match &a.templates {
        Some(p) => Some(LabelSchema::from_json(
            &std::fs::read_to_string(p).with_context(|| format!("reading templates {}", p.display()))?,
        )?),
        None => LabelSchema::default_for(kind),
    };
    let instances = read_tasks(open(&a.input)?, kind)?;
    let converted: Vec<Vec<MrcExample>> =
        instances.par_iter().map(|i| to_mrc(i, schema.as_ref())).collect::<wae_core::Result<_>>()?;
    let examples: Vec<MrcExample> = converted.into_iter().flatten().collect();
    write_corpus(&a.out, &examples)?;
    if let Some(p) = &a.render {
        let mut w = create(p)?;
        for e in &examples {
            writeln!(w, "{}", render_row(e))?;
        }
        w.flush()?;
    }
    log::info!("{} {} instances -> {} examples", instances.len(), kind.name(), examples.len());
    Ok(())
}

fn selftest(a: SelftestArgs, cfg: &RunConfig) -> Result<()> {
    let report = run_selftest(&cfg.selftest)?;
    match &a.report {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    for c in &report.checks {
        log::info!("{}: {} cases, {} failures, {:.3}s", c.name, c.cases, c.failures, c.seconds);
    }
    if !report.all_passed {
        return Err(Invariant("selftest failed".into()).into());
    }
    Ok(())
}

fn train(a: TrainArgs, cfg: &RunConfig) -> Result<()> {
    let t = &cfg.train;
    let data = synthetic_corpus(t.examples, t.unanswerable, t.seed);
    let report = demo_train(t, &data)?;
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    let f = report.final_loss;
    println!(
        "final loss_wae {:.6} loss_cls {:.6} loss_ext {:.6} after {} steps; below {} at step {}; decode accuracy {:.3}; y_cls accuracy {:.3}",
        f.total,
        f.cls,
        f.ext,
        report.steps,
        t.target_loss,
        report.converged_at.map_or_else(|| "never".to_string(), |s| s.to_string()),
        report.decode_accuracy,
        report.cls_accuracy
    );
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| wae_core::Error::MalformedRecord {
            record: n + 1,
            reason: format!("{}: {e}", path.display()),
        })?);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct EqaPred {
    id: String,
    #[serde(default)]
    answer: String,
}

#[derive(Deserialize)]
struct NerPred {
    id: String,
    #[serde(default)]
    entities: Vec<Entity>,
}

#[derive(Deserialize)]
struct ClsPred {
    id: String,
    label: serde_json::Value,
}

fn label_text(v: &serde_json::Value, mcqa: bool) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) if mcqa => {
            let k =
                n.as_u64().ok_or_else(|| anyhow!(wae_core::Error::InvalidInput(format!("bad choice index {n}"))))?;
            Ok(choice_tag(k as usize))
        }
        other => bail!(wae_core::Error::InvalidInput(format!("bad label {other}"))),
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.kind == "rationale" {
        let rationales: Vec<Rationale> = read_jsonl(&a.pred)?;
        let judgments: Option<BTreeMap<String, bool>> = match &a.gold {
            Some(p) => Some(serde_json::from_reader(open(p)?).with_context(|| format!("parsing {}", p.display()))?),
            None => None,
        };
        let report = rationale_report(&rationales, judgments.as_ref())?;
        if let Some(p) = &a.sheet {
            let mut w = create(p)?;
            for line in &report.sheet {
                serde_json::to_writer(&mut w, line)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        return write_json(&a.report, &report);
    }
    let kind = TaskKind::parse(&a.kind)?;
    let gold_path = required(&a.gold, "gold")?;
    let report: EvalReport = match kind {
        TaskKind::Eqa => {
            let gold: BTreeMap<String, Vec<String>> = read_eqa(open(gold_path)?)?
                .into_iter()
                .map(|q| (q.id, q.answers.into_iter().map(|x| x.text).collect()))
                .collect();
            let preds: BTreeMap<String, String> =
                read_jsonl::<EqaPred>(&a.pred)?.into_iter().map(|p| (p.id, p.answer)).collect();
            eqa_report(&preds, &gold)?
        }
        TaskKind::Ner => {
            let gold: BTreeMap<String, Vec<Entity>> =
                read_conll(open(gold_path)?)?.into_iter().map(|i| (i.id, i.entities)).collect();
            let preds: BTreeMap<String, Vec<Entity>> =
                read_jsonl::<NerPred>(&a.pred)?.into_iter().map(|p| (p.id, p.entities)).collect();
            ner_report(&preds, &gold)?
        }
        _ => {
            let mcqa = kind == TaskKind::Mcqa;
            let gold: BTreeMap<String, String> = read_cls_jsonl(open(gold_path)?, kind)?
                .into_iter()
                .map(|i| match i {
                    TaskInstance::Mcqa(m) => (m.id, choice_tag(m.label)),
                    TaskInstance::PairCls(p) => (p.id, p.label),
                    TaskInstance::SentCls(s) => (s.id, s.label),
                    other => (other.id().to_string(), String::new()),
                })
                .collect();
            let preds: BTreeMap<String, String> = read_jsonl::<ClsPred>(&a.pred)?
                .into_iter()
                .map(|p| Ok((p.id, label_text(&p.label, mcqa)?)))
                .collect::<Result<_>>()?;
            cls_report(kind, &preds, &gold)?
        }
    };
    for (k, v) in report.display() {
        log::info!("{k}: {v:.2}");
    }
    write_json(&a.report, &report)
}
