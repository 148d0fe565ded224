//! Turns eligible anchor entities into answerable and unanswerable
//! (query, context, answers) examples and splits off a held-out dev set.

mod context;
mod pairing;
mod query;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use context::{build_context, label_all_mentions, Window};
pub use pairing::{
    bm25, cluster_representatives, hashed_bow, kmeans, sample_filtered, sample_indices, top_k, Bm25, RelevanceScorer,
    BM25_B, BM25_K1, KMEANS_ITERATIONS,
};
pub use query::{anonymize_query, build_query, contains_title, max_title_overlap, sentence_tokens, ANON_TOKEN};

use crate::error::{Error, Result};
use crate::example::{MrcExample, Provenance};
use crate::head::toy::stable_hash;
use crate::ingest::{AliasTable, Article, InlinkEntry, InlinkIndex};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "p", rename_all = "kebab-case")]
pub enum PairingStrategy {
    #[default]
    Random,
    /// The `p` contexts most similar to the query.
    RelTopP(usize),
    /// The top `p` percent of contexts by similarity (at least one).
    RelTopPct(f64),
    /// A fresh query per example, one sentence drawn from the first `p`.
    QDiv(usize),
    /// One context from each of `p` clusters of context vectors.
    CDiv(usize),
}

impl PairingStrategy {
    pub fn parse(kind: &str, p: Option<f64>) -> Result<Self> {
        let need = || p.ok_or_else(|| Error::InvalidInput(format!("strategy {kind} needs --p")));
        let whole = |p: f64| {
            if p >= 1.0 && p.fract() == 0.0 {
                Ok(p as usize)
            } else {
                Err(Error::InvalidInput(format!("strategy {kind} needs a positive integer p, got {p}")))
            }
        };
        let s = match kind {
            "random" => Self::Random,
            "rel-top-p" => Self::RelTopP(whole(need()?)?),
            "rel-top-pct" => Self::RelTopPct(need()?),
            "q-div" => Self::QDiv(whole(need()?)?),
            "c-div" => Self::CDiv(whole(need()?)?),
            other => return Err(Error::InvalidInput(format!("unknown strategy {other:?}"))),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::RelTopP(_) => "rel-top-p",
            Self::RelTopPct(_) => "rel-top-pct",
            Self::QDiv(_) => "q-div",
            Self::CDiv(_) => "c-div",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::RelTopPct(p) if !(p > 0.0 && p <= 100.0) => {
                Err(Error::InvalidInput(format!("percentage must be in (0, 100], got {p}")))
            }
            Self::RelTopP(0) | Self::QDiv(0) | Self::CDiv(0) => Err(Error::InvalidInput("p must be positive".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuilderConfig {
    pub window: usize,
    pub query_sentences: usize,
    pub query_min_words: usize,
    pub answerable_per_entity: usize,
    pub unanswerable_per_entity: usize,
    pub inlink_threshold: usize,
    pub anonymize_threshold: f64,
    pub strategy: PairingStrategy,
    pub dev_entities: usize,
    pub seed: u64,
    /// Also reject unanswerable contexts that spell out the entity title.
    pub exclude_title_matches: bool,
    /// Dimension of the built-in context vectors for cluster pairing.
    pub vector_dim: usize,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        Self {
            window: 2,
            query_sentences: 1,
            query_min_words: 30,
            answerable_per_entity: 10,
            unanswerable_per_entity: 10,
            inlink_threshold: 10,
            anonymize_threshold: 0.5,
            strategy: PairingStrategy::Random,
            dev_entities: 1000,
            seed: 0,
            exclude_title_matches: true,
            vector_dim: 64,
        }
    }
}

impl BuilderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.anonymize_threshold > 0.0 && self.anonymize_threshold <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "anonymize threshold must be in (0, 1], got {}",
                self.anonymize_threshold
            )));
        }
        if self.vector_dim == 0 {
            return Err(Error::InvalidInput("vector dimension must be positive".into()));
        }
        self.strategy.validate()
    }
}

/// Identifies a context window: article id and inclusive sentence range.
pub type WindowKey = (u64, usize, usize);

/// Vectors for cluster pairing, keyed by window. Windows without an entry
/// fall back to the hashed bag of words.
#[derive(Debug, Clone, Default)]
pub struct ContextVectors(pub HashMap<WindowKey, Vec<f64>>);

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VectorRecord {
    article: u64,
    sentences: [usize; 2],
    vector: Vec<f64>,
}

impl ContextVectors {
    /// Reads `{"article":…, "sentences":[first,last], "vector":[…]}` lines.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut map = HashMap::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: VectorRecord = serde_json::from_str(&line)
                .map_err(|e| Error::MalformedRecord { record: n + 1, reason: e.to_string() })?;
            map.insert((r.article, r.sentences[0], r.sentences[1]), r.vector);
        }
        Ok(Self(map))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub eligible_entities: usize,
    pub missing_definition: usize,
    pub empty_definition: usize,
    pub entities_without_context: usize,
    pub alignment_failures: usize,
    /// Anchors folded into a window already produced for the same entity.
    pub merged_mentions: usize,
    pub unanswerable_short: usize,
    pub unanswerable_exhausted: usize,
    pub answerable: usize,
    pub unanswerable: usize,
}

impl BuildStats {
    fn add(&mut self, o: &BuildStats) {
        self.eligible_entities += o.eligible_entities;
        self.missing_definition += o.missing_definition;
        self.empty_definition += o.empty_definition;
        self.entities_without_context += o.entities_without_context;
        self.alignment_failures += o.alignment_failures;
        self.merged_mentions += o.merged_mentions;
        self.unanswerable_short += o.unanswerable_short;
        self.unanswerable_exhausted += o.unanswerable_exhausted;
        self.answerable += o.answerable;
        self.unanswerable += o.unanswerable;
    }
}

/// A context window around one or more mentions of an entity.
#[derive(Debug, Clone)]
struct Candidate {
    window: Window,
    anchors: Vec<(usize, usize)>,
}

struct EntityPlan<'a> {
    title: String,
    definition: &'a Article,
    query: Vec<String>,
    raw_query: Vec<String>,
    candidates: Vec<Candidate>,
}

struct PoolEntry {
    window: Window,
    targets: BTreeSet<String>,
}

fn entity_rng(seed: u64, title: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stable_hash(title))
}

fn resolve_target(aliases: &AliasTable, target: &str) -> String {
    aliases.resolve(target).to_string()
}

/// Builds the corpus for every entity of `index` that passes the inlink
/// threshold and has a definition article. Output is sorted by entity title
/// then example id, independent of thread scheduling.
pub fn build_corpus(
    articles: &[Article],
    index: &InlinkIndex,
    aliases: &AliasTable,
    cfg: &BuilderConfig,
    vectors: Option<&ContextVectors>,
) -> Result<(Vec<MrcExample>, BuildStats)> {
    cfg.validate()?;
    let by_id: HashMap<u64, &Article> = articles.iter().map(|a| (a.id, a)).collect();
    let mut by_title: HashMap<String, &Article> = HashMap::new();
    for a in articles {
        let t = resolve_target(aliases, &a.title);
        by_title
            .entry(t)
            .and_modify(|e| {
                if a.id < e.id {
                    *e = a
                }
            })
            .or_insert(a);
    }

    let eligible: Vec<(&String, &InlinkEntry)> = index.eligible(cfg.inlink_threshold).collect();
    let planned: Vec<(Option<EntityPlan>, BuildStats)> =
        eligible.par_iter().map(|(title, entry)| plan_entity(title, entry, &by_id, &by_title, aliases, cfg)).collect();

    let mut stats = BuildStats { eligible_entities: eligible.len(), ..Default::default() };
    let mut plans = Vec::new();
    for (plan, s) in planned {
        stats.add(&s);
        plans.extend(plan);
    }

    let pool = build_pool(&plans, &by_id, aliases);
    let results: Vec<(Vec<MrcExample>, BuildStats)> =
        plans.par_iter().map(|p| pair_entity(p, &pool, cfg, vectors)).collect();
    let mut examples = Vec::new();
    for (ex, s) in results {
        stats.add(&s);
        examples.extend(ex);
    }
    examples.sort_by(|a, b| (&a.entity, &a.id).cmp(&(&b.entity, &b.id)));
    Ok((examples, stats))
}

fn plan_entity<'a>(
    title: &str,
    entry: &InlinkEntry,
    by_id: &HashMap<u64, &'a Article>,
    by_title: &HashMap<String, &'a Article>,
    aliases: &AliasTable,
    cfg: &BuilderConfig,
) -> (Option<EntityPlan<'a>>, BuildStats) {
    let mut stats = BuildStats::default();
    let Some(&definition) = by_title.get(title) else {
        stats.missing_definition += 1;
        return (None, stats);
    };
    let raw_query = match build_query(definition, cfg.query_sentences, cfg.query_min_words) {
        Ok(q) => q,
        Err(_) => {
            stats.empty_definition += 1;
            return (None, stats);
        }
    };
    let query = anonymize_query(&raw_query, title, cfg.anonymize_threshold);

    let mut windows: BTreeMap<WindowKey, Candidate> = BTreeMap::new();
    for r in &entry.mention_refs {
        let Some(&article) = by_id.get(&r.article_id) else {
            stats.alignment_failures += 1;
            continue;
        };
        if article.id == definition.id {
            continue;
        }
        let Some(anchor) = article.anchors.get(r.anchor_ordinal) else {
            stats.alignment_failures += 1;
            continue;
        };
        let Some(s) = article.sentence_of(anchor.char_start, anchor.char_end) else {
            stats.alignment_failures += 1;
            continue;
        };
        let window = Window::around(article, s, cfg.window);
        let key = (article.id, window.first, window.last);
        if windows.contains_key(&key) {
            stats.merged_mentions += 1;
            continue;
        }
        // every anchor in the window that targets this entity is a mention
        let mut spans = Vec::new();
        let mut failed = false;
        for a in &article.anchors {
            if a.char_start >= window.char_start
                && a.char_end <= window.char_end
                && resolve_target(aliases, &a.target_title) == title
            {
                match window.locate(a) {
                    Ok(span) => spans.push(span),
                    Err(_) if std::ptr::eq(a, anchor) => failed = true,
                    Err(_) => stats.alignment_failures += 1,
                }
            }
        }
        if failed {
            stats.alignment_failures += 1;
            continue;
        }
        windows.insert(key, Candidate { window, anchors: spans });
    }
    if windows.is_empty() {
        stats.entities_without_context += 1;
        return (None, stats);
    }
    let plan = EntityPlan {
        title: title.to_string(),
        definition,
        query,
        raw_query,
        candidates: windows.into_values().collect(),
    };
    (Some(plan), stats)
}

/// Every window built for some entity, deduplicated, with the targets of all
/// anchors inside it.
fn build_pool(plans: &[EntityPlan], by_id: &HashMap<u64, &Article>, aliases: &AliasTable) -> Vec<PoolEntry> {
    let mut seen: BTreeMap<WindowKey, &Window> = BTreeMap::new();
    for p in plans {
        for c in &p.candidates {
            seen.entry((c.window.article_id, c.window.first, c.window.last)).or_insert(&c.window);
        }
    }
    seen.into_values()
        .map(|w| {
            let article = by_id[&w.article_id];
            let targets = article
                .anchors
                .iter()
                .filter(|a| a.char_start >= w.char_start && a.char_end <= w.char_end)
                .map(|a| resolve_target(aliases, &a.target_title))
                .collect();
            PoolEntry { window: w.clone(), targets }
        })
        .collect()
}

fn pair_entity(
    plan: &EntityPlan,
    pool: &[PoolEntry],
    cfg: &BuilderConfig,
    vectors: Option<&ContextVectors>,
) -> (Vec<MrcExample>, BuildStats) {
    let mut stats = BuildStats::default();
    let mut rng = entity_rng(cfg.seed, &plan.title);
    let chosen = select_answerable(plan, cfg, vectors, &mut rng);
    let strategy = cfg.strategy.name();
    let mut out = Vec::new();
    for (k, (c, query)) in chosen.into_iter().enumerate() {
        let answers = label_all_mentions(&c.window.tokens, &c.anchors);
        out.push(MrcExample {
            id: format!("{}-a{:04}", plan.definition.id, k),
            entity: plan.title.clone(),
            query,
            context: c.window.tokens.clone(),
            answerable: true,
            answers,
            prov: Provenance {
                definition: Some(plan.definition.id),
                mention: Some(c.window.article_id),
                strategy: strategy.to_string(),
                sentences: Some([c.window.first, c.window.last]),
            },
        });
    }
    stats.answerable = out.len();

    let n = cfg.unanswerable_per_entity;
    let picked = sample_filtered(pool.len(), n, &mut rng, |i| {
        let e = &pool[i];
        !e.targets.contains(&plan.title)
            && !(cfg.exclude_title_matches && contains_title(&e.window.tokens, &plan.title))
    });
    if picked.len() < n {
        stats.unanswerable_short += 1;
        if picked.is_empty() && n > 0 {
            stats.unanswerable_exhausted += 1;
            log::warn!("no unanswerable context available for {:?}", plan.title);
        }
    }
    for (k, i) in picked.into_iter().enumerate() {
        let w = &pool[i].window;
        out.push(MrcExample {
            id: format!("{}-u{:04}", plan.definition.id, k),
            entity: plan.title.clone(),
            query: plan.query.clone(),
            context: w.tokens.clone(),
            answers: Vec::new(),
            answerable: false,
            prov: Provenance {
                definition: Some(plan.definition.id),
                mention: Some(w.article_id),
                strategy: strategy.to_string(),
                sentences: Some([w.first, w.last]),
            },
        });
    }
    stats.unanswerable = out.len() - stats.answerable;
    (out, stats)
}

/// Contexts paired with the entity's query, with the query to use for each.
fn select_answerable<'p>(
    plan: &'p EntityPlan,
    cfg: &BuilderConfig,
    vectors: Option<&ContextVectors>,
    rng: &mut ChaCha8Rng,
) -> Vec<(&'p Candidate, Vec<String>)> {
    let cands = &plan.candidates;
    let n = cfg.answerable_per_entity;
    let with_query = |idx: Vec<usize>| idx.into_iter().map(|i| (&cands[i], plan.query.clone())).collect::<Vec<_>>();
    let relevance = || {
        let docs: Vec<&[String]> = cands.iter().map(|c| c.window.tokens.as_slice()).collect();
        Bm25.score(&plan.raw_query, &docs)
    };
    match cfg.strategy {
        PairingStrategy::Random => {
            let mut idx = sample_indices(cands.len(), n, rng);
            idx.sort_unstable();
            with_query(idx)
        }
        PairingStrategy::RelTopP(p) => with_query(top_k(&relevance(), p)),
        PairingStrategy::RelTopPct(pct) => {
            let k = ((cands.len() as f64 * pct / 100.0).ceil() as usize).max(1);
            with_query(top_k(&relevance(), k))
        }
        PairingStrategy::QDiv(p) => {
            let mut idx = sample_indices(cands.len(), n, rng);
            idx.sort_unstable();
            let lead = p.min(plan.definition.sentences.len());
            idx.into_iter()
                .map(|i| {
                    let s = rng.random_range(0..lead);
                    let q = sentence_tokens(plan.definition, s, s);
                    (&cands[i], anonymize_query(&q, &plan.title, cfg.anonymize_threshold))
                })
                .collect()
        }
        PairingStrategy::CDiv(p) => {
            let vs: Vec<Vec<f64>> = cands
                .iter()
                .map(|c| {
                    let w = &c.window;
                    vectors
                        .and_then(|v| v.0.get(&(w.article_id, w.first, w.last)).cloned())
                        .unwrap_or_else(|| hashed_bow(&w.tokens, cfg.vector_dim))
                })
                .collect();
            let mut idx = cluster_representatives(&vs, p, rng);
            idx.sort_unstable();
            with_query(idx)
        }
    }
}

/// Reserves `n` entities (seeded) and moves every example whose query comes
/// from them into the dev split.
pub fn split_dev(corpus: Vec<MrcExample>, n: usize, seed: u64) -> Result<(Vec<MrcExample>, Vec<MrcExample>)> {
    let entities: BTreeSet<&str> = corpus.iter().map(|e| e.entity.as_str()).collect();
    if n > entities.len() {
        return Err(Error::NotEnoughEntities { requested: n, available: entities.len() });
    }
    let mut order: Vec<&str> = entities.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let dev: HashSet<String> = order[..n].iter().map(|s| s.to_string()).collect();
    Ok(corpus.into_iter().partition(|e| !dev.contains(&e.entity)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub examples: usize,
    pub answerable: usize,
    pub unanswerable: usize,
    /// Query plus context tokens.
    pub total_words: usize,
    pub entities: usize,
}

pub fn corpus_stats(corpus: &[MrcExample]) -> CorpusStats {
    let entities: HashSet<&str> = corpus.iter().map(|e| e.entity.as_str()).collect();
    let answerable = corpus.iter().filter(|e| e.answerable).count();
    CorpusStats {
        examples: corpus.len(),
        answerable,
        unanswerable: corpus.len() - answerable,
        total_words: corpus.iter().map(MrcExample::word_count).sum(),
        entities: entities.len(),
    }
}

pub fn write_examples<W: Write>(out: &mut W, examples: &[MrcExample]) -> Result<()> {
    for e in examples {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_examples<R: BufRead>(input: R) -> Result<Vec<MrcExample>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: MrcExample =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord { record: n + 1, reason: e.to_string() })?;
        out.push(ex);
    }
    Ok(out)
}
