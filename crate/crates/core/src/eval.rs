//! Task metrics: SQuAD-style token F1 and exact match, entity-level micro
//! F1, accuracy, and the rationale agreement report.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::{Entity, TaskKind};

/// Lowercase, drop punctuation, drop the articles a/an/the, squeeze spaces.
pub fn normalize_answer(s: &str) -> String {
    let lowered: String = s.to_lowercase().chars().filter(|c| !c.is_ascii_punctuation()).collect();
    lowered.split_whitespace().filter(|w| !matches!(*w, "a" | "an" | "the")).collect::<Vec<_>>().join(" ")
}

fn f1_single(pred: &str, gold: &str) -> f64 {
    let p: Vec<&str> = pred.split_whitespace().collect();
    let g: Vec<&str> = gold.split_whitespace().collect();
    if p.is_empty() || g.is_empty() {
        return if p == g { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut same = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                same += 1;
            }
        }
    }
    if same == 0 {
        return 0.0;
    }
    let precision = same as f64 / p.len() as f64;
    let recall = same as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Token F1 and exact match, each maximized over the gold answers. An empty
/// gold list stands for "no answer", matched only by an empty prediction.
pub fn eqa_score(pred: &str, golds: &[String]) -> (f64, bool) {
    let p = normalize_answer(pred);
    if golds.is_empty() {
        return if p.is_empty() { (1.0, true) } else { (0.0, false) };
    }
    let mut best = (0.0f64, false);
    for g in golds {
        let g = normalize_answer(g);
        best.0 = best.0.max(f1_single(&p, &g));
        best.1 |= p == g;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from counts; zero when a denominator is zero.
pub fn prf(correct: usize, predicted: usize, gold: usize) -> Prf {
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = div(correct, predicted);
    let recall = div(correct, gold);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Prf { precision, recall, f1 }
}

/// Exact-match micro scores over (span, label) sets.
pub fn ner_score(pred: &[Entity], gold: &[Entity]) -> Prf {
    let p: HashSet<&Entity> = pred.iter().collect();
    let g: HashSet<&Entity> = gold.iter().collect();
    prf(p.intersection(&g).count(), p.len(), g.len())
}

pub fn cls_score<T: PartialEq>(preds: &[T], golds: &[T]) -> Result<f64> {
    if preds.len() != golds.len() {
        return Err(Error::Shape(format!("{} predictions for {} gold labels", preds.len(), golds.len())));
    }
    if golds.is_empty() {
        return Ok(0.0);
    }
    Ok(preds.iter().zip(golds).filter(|(p, g)| p == g).count() as f64 / golds.len() as f64)
}

/// A classification decision with its supporting context span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rationale {
    pub id: String,
    pub label: String,
    pub context: Vec<String>,
    pub start: usize,
    pub end: usize,
}

/// One review-sheet line: the rationale with the span bracketed in the text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewLine {
    pub id: String,
    pub label: String,
    pub span: String,
    pub highlighted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationaleReport {
    pub rationales: usize,
    pub sheet: Vec<ReviewLine>,
    /// Share judged reasonable; present only when judgments were supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reasonable: Option<f64>,
}

pub fn review_line(r: &Rationale) -> ReviewLine {
    let mut out = Vec::with_capacity(r.context.len() + 2);
    for (k, t) in r.context.iter().enumerate() {
        if k == r.start {
            out.push("[[".to_string());
        }
        out.push(t.clone());
        if k == r.end {
            out.push("]]".to_string());
        }
    }
    let end = r.end.min(r.context.len().saturating_sub(1));
    let span = if r.start <= end { r.context[r.start..=end].join(" ") } else { String::new() };
    ReviewLine { id: r.id.clone(), label: r.label.clone(), span, highlighted: out.join(" ") }
}

/// Review sheet for `rationales`, and with `judgments` (id to reasonable or
/// not, covering exactly the same ids) the share judged reasonable.
pub fn rationale_report(
    rationales: &[Rationale],
    judgments: Option<&BTreeMap<String, bool>>,
) -> Result<RationaleReport> {
    let sheet: Vec<ReviewLine> = rationales.iter().map(review_line).collect();
    let reasonable = match judgments {
        None => None,
        Some(j) => {
            let ids: HashSet<&str> = rationales.iter().map(|r| r.id.as_str()).collect();
            if ids.len() != rationales.len() {
                return Err(Error::IdMismatch("duplicate rationale ids".into()));
            }
            if let Some(missing) = ids.iter().find(|id| !j.contains_key(**id)) {
                return Err(Error::IdMismatch(format!("no judgment for rationale {missing:?}")));
            }
            if let Some(extra) = j.keys().find(|k| !ids.contains(k.as_str())) {
                return Err(Error::IdMismatch(format!("judgment {extra:?} has no rationale")));
            }
            let n = rationales.len();
            Some(if n == 0 { 0.0 } else { j.values().filter(|v| **v).count() as f64 / n as f64 })
        }
    };
    Ok(RationaleReport { rationales: rationales.len(), sheet, reasonable })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub id: String,
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskKind,
    /// Metric name to value in [0, 1].
    pub metrics: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
    pub instances: Vec<InstanceScore>,
}

impl EvalReport {
    pub fn new(task: TaskKind) -> Self {
        Self { task, metrics: BTreeMap::new(), counts: BTreeMap::new(), instances: Vec::new() }
    }

    /// Metrics ×100 for display.
    pub fn display(&self) -> BTreeMap<String, f64> {
        self.metrics.iter().map(|(k, v)| (k.clone(), v * 100.0)).collect()
    }
}

/// Mean F1 and exact match over question ids present in `gold`; questions
/// without a prediction count as empty predictions.
pub fn eqa_report(preds: &BTreeMap<String, String>, gold: &BTreeMap<String, Vec<String>>) -> Result<EvalReport> {
    if let Some(extra) = preds.keys().find(|k| !gold.contains_key(*k)) {
        return Err(Error::IdMismatch(format!("prediction {extra:?} has no gold answer")));
    }
    let mut report = EvalReport::new(TaskKind::Eqa);
    let (mut f1, mut em) = (0.0, 0.0);
    for (id, golds) in gold {
        let pred = preds.get(id).map_or("", String::as_str);
        let (f, e) = eqa_score(pred, golds);
        f1 += f;
        em += f64::from(u8::from(e));
        report.instances.push(InstanceScore {
            id: id.clone(),
            values: BTreeMap::from([("f1".into(), f), ("em".into(), f64::from(u8::from(e)))]),
        });
    }
    let n = gold.len().max(1) as f64;
    report.metrics.insert("f1".into(), f1 / n);
    report.metrics.insert("em".into(), em / n);
    report.counts.insert("questions".into(), gold.len());
    report.counts.insert("predicted".into(), preds.len());
    Ok(report)
}

/// Micro scores over all instances; ids are the instance ids of `gold`.
pub fn ner_report(preds: &BTreeMap<String, Vec<Entity>>, gold: &BTreeMap<String, Vec<Entity>>) -> Result<EvalReport> {
    if let Some(extra) = preds.keys().find(|k| !gold.contains_key(*k)) {
        return Err(Error::IdMismatch(format!("prediction {extra:?} has no gold instance")));
    }
    let mut report = EvalReport::new(TaskKind::Ner);
    let (mut correct, mut predicted, mut total) = (0, 0, 0);
    for (id, g) in gold {
        let p = preds.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let ps: HashSet<&Entity> = p.iter().collect();
        let gs: HashSet<&Entity> = g.iter().collect();
        let c = ps.intersection(&gs).count();
        correct += c;
        predicted += ps.len();
        total += gs.len();
        let s = prf(c, ps.len(), gs.len());
        report.instances.push(InstanceScore {
            id: id.clone(),
            values: BTreeMap::from([
                ("precision".into(), s.precision),
                ("recall".into(), s.recall),
                ("f1".into(), s.f1),
            ]),
        });
    }
    let s = prf(correct, predicted, total);
    report.metrics.insert("precision".into(), s.precision);
    report.metrics.insert("recall".into(), s.recall);
    report.metrics.insert("f1".into(), s.f1);
    report.counts.insert("correct".into(), correct);
    report.counts.insert("predicted".into(), predicted);
    report.counts.insert("gold".into(), total);
    Ok(report)
}

/// Accuracy over gold ids; a missing prediction counts as wrong.
pub fn cls_report(
    kind: TaskKind,
    preds: &BTreeMap<String, String>,
    gold: &BTreeMap<String, String>,
) -> Result<EvalReport> {
    if let Some(extra) = preds.keys().find(|k| !gold.contains_key(*k)) {
        return Err(Error::IdMismatch(format!("prediction {extra:?} has no gold label")));
    }
    let mut report = EvalReport::new(kind);
    let mut right = 0usize;
    for (id, g) in gold {
        let ok = preds.get(id) == Some(g);
        right += usize::from(ok);
        report.instances.push(InstanceScore {
            id: id.clone(),
            values: BTreeMap::from([("correct".into(), f64::from(u8::from(ok)))]),
        });
    }
    report.metrics.insert("accuracy".into(), if gold.is_empty() { 0.0 } else { right as f64 / gold.len() as f64 });
    report.counts.insert("instances".into(), gold.len());
    report.counts.insert("correct".into(), right);
    Ok(report)
}
