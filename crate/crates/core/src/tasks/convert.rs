use serde::{Deserialize, Serialize};

use super::{
    Branch, EqaInstance, InstanceGroup, LabelSchema, McqaInstance, NerInstance, PairClsInstance, SentClsInstance,
    TaskInstance, TaskKind,
};
use crate::error::{Error, Result};
use crate::example::{AnswerSpan, MrcExample, Provenance};
use crate::head::{encode_input, extract_rationale, DecodedSpan, Overlap, ScoreMatrix};
use crate::text::{is_punct, tokenize, tokenize_with_offsets, Token, TokenStyle};

const STYLE: TokenStyle = TokenStyle::Terminal;

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn prov(kind: TaskKind) -> Provenance {
    Provenance { strategy: kind.name().to_string(), ..Default::default() }
}

fn branch_id(instance: &str, tag: &str) -> String {
    format!("{instance}#{tag}")
}

/// Query text for an NER label: the quoted label, a period, the description.
pub fn ner_query(label: &str, description: &str) -> Vec<String> {
    words(&format!("\"{label}\" . {description}"))
}

pub fn ner_to_mrc(instance: &NerInstance, schema: &LabelSchema) -> Result<InstanceGroup> {
    for e in &instance.entities {
        if e.start > e.end || e.end >= instance.tokens.len() {
            return Err(Error::Alignment(format!(
                "{}: entity ({}, {}) outside {} tokens",
                instance.id,
                e.start,
                e.end,
                instance.tokens.len()
            )));
        }
        if schema.position(&e.label).is_none() {
            return Err(Error::InvalidInput(format!("{}: label {:?} not in schema", instance.id, e.label)));
        }
    }
    let branches = schema
        .entries()
        .iter()
        .map(|(label, desc)| {
            let mut spans: Vec<(usize, usize)> =
                instance.entities.iter().filter(|e| &e.label == label).map(|e| (e.start, e.end)).collect();
            spans.sort_unstable();
            spans.dedup();
            let answers: Vec<AnswerSpan> =
                spans.into_iter().map(|(a, b)| AnswerSpan::from_context(&instance.tokens, a, b)).collect();
            let answerable = !answers.is_empty();
            Branch {
                tag: label.clone(),
                gold: answerable,
                example: MrcExample {
                    id: branch_id(&instance.id, label),
                    entity: label.clone(),
                    query: ner_query(label, desc),
                    context: instance.tokens.clone(),
                    answers,
                    answerable,
                    prov: prov(TaskKind::Ner),
                },
            }
        })
        .collect();
    Ok(InstanceGroup { instance_id: instance.id.clone(), kind: TaskKind::Ner, branches })
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace() && !is_punct(*c)).flat_map(char::to_lowercase).collect()
}

/// Token span for the gold char range `[start, end)`: exact token boundaries
/// first, then the nearest span equal to the answer once punctuation and
/// spacing are ignored.
fn align(tokens: &[Token], start: usize, end: usize, text: &str) -> Option<(usize, usize)> {
    let first = tokens.iter().position(|t| t.start == start);
    if let Some(first) = first {
        if let Some(off) = tokens[first..].iter().position(|t| t.end == end) {
            return Some((first, first + off));
        }
    }
    let want = squash(text);
    if want.is_empty() {
        return None;
    }
    let mut best: Option<(usize, (usize, usize))> = None;
    for a in 0..tokens.len() {
        let mut acc = String::new();
        for b in a..tokens.len() {
            acc.push_str(&squash(&tokens[b].text));
            if acc.len() > want.len() {
                break;
            }
            if acc == want && !squash(&tokens[a].text).is_empty() && !squash(&tokens[b].text).is_empty() {
                let dist = tokens[a].start.abs_diff(start);
                if best.is_none_or(|(d, _)| dist < d) {
                    best = Some((dist, (a, b)));
                }
            }
        }
    }
    best.map(|(_, s)| s)
}

pub fn eqa_to_mrc(instance: &EqaInstance) -> Result<MrcExample> {
    let query = tokenize(&instance.question, STYLE);
    let toks = tokenize_with_offsets(&instance.context, STYLE);
    let context: Vec<String> = toks.iter().map(|t| t.text.clone()).collect();
    let mut spans = Vec::new();
    for a in &instance.answers {
        let end = a.start + a.text.chars().count();
        let span = align(&toks, a.start, end, &a.text).ok_or_else(|| {
            Error::Alignment(format!("{}: answer {:?} at char {}..{} not alignable", instance.id, a.text, a.start, end))
        })?;
        spans.push(span);
    }
    spans.sort_unstable();
    spans.dedup();
    let answers: Vec<AnswerSpan> = spans.into_iter().map(|(a, b)| AnswerSpan::from_context(&context, a, b)).collect();
    Ok(MrcExample {
        id: instance.id.clone(),
        entity: String::new(),
        query,
        context,
        answerable: !answers.is_empty(),
        answers,
        prov: prov(TaskKind::Eqa),
    })
}

fn ends_with_terminal(tokens: &[String]) -> bool {
    tokens.last().is_some_and(|t| matches!(t.as_str(), "." | "?" | "!"))
}

/// Question stem (trailing colon dropped) followed by the choice, closed
/// with a period when the choice has no final punctuation.
pub fn mcqa_query(question: &str, choice: &str) -> Vec<String> {
    let stem = question.trim_end().trim_end_matches(':');
    let mut q = tokenize(stem, STYLE);
    q.extend(tokenize(choice, STYLE));
    if !ends_with_terminal(&q) {
        q.push(".".into());
    }
    q
}

pub fn pair_context(hypothesis: &str, premise: &str) -> Vec<String> {
    let mut c = vec!["Hypothesis".to_string(), ":".to_string()];
    c.extend(tokenize(hypothesis, STYLE));
    c.push("Premise".into());
    c.push(":".into());
    c.extend(tokenize(premise, STYLE));
    c
}

fn cls_group(
    id: &str,
    kind: TaskKind,
    context: Vec<String>,
    queries: Vec<(String, Vec<String>)>,
    gold: usize,
) -> Result<InstanceGroup> {
    if queries.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{id}: classification needs at least 2 branches, got {}",
            queries.len()
        )));
    }
    if gold >= queries.len() {
        return Err(Error::InvalidInput(format!("{id}: gold branch {gold} out of range")));
    }
    let branches = queries
        .into_iter()
        .enumerate()
        .map(|(k, (tag, query))| Branch {
            example: MrcExample {
                id: branch_id(id, &tag),
                entity: tag.clone(),
                query,
                context: context.clone(),
                answers: Vec::new(),
                answerable: k == gold,
                prov: prov(kind),
            },
            gold: k == gold,
            tag,
        })
        .collect();
    Ok(InstanceGroup { instance_id: id.to_string(), kind, branches })
}

fn label_queries(schema: &LabelSchema) -> Vec<(String, Vec<String>)> {
    schema.entries().iter().map(|(n, t)| (n.clone(), words(t))).collect()
}

fn gold_label(id: &str, schema: &LabelSchema, label: &str) -> Result<usize> {
    schema.position(label).ok_or_else(|| Error::InvalidInput(format!("{id}: label {label:?} not in schema")))
}

/// Choice tags are letters A, B, C, ...
pub fn choice_tag(k: usize) -> String {
    if k < 26 {
        char::from(b'A' + k as u8).to_string()
    } else {
        format!("C{k}")
    }
}

/// Classification and multiple-choice instances. `schema` is required for
/// labelled kinds and ignored for multiple choice.
pub fn cls_to_mrc(instance: &TaskInstance, schema: Option<&LabelSchema>) -> Result<InstanceGroup> {
    let need = || schema.ok_or_else(|| Error::InvalidInput("classification needs a label schema".into()));
    match instance {
        TaskInstance::Mcqa(McqaInstance { id, question, context, choices, label }) => {
            let queries = choices.iter().enumerate().map(|(k, c)| (choice_tag(k), mcqa_query(question, c))).collect();
            cls_group(id, TaskKind::Mcqa, tokenize(context, STYLE), queries, *label)
        }
        TaskInstance::PairCls(PairClsInstance { id, hypothesis, premise, label }) => {
            let schema = need()?;
            let gold = gold_label(id, schema, label)?;
            cls_group(id, TaskKind::PairCls, pair_context(hypothesis, premise), label_queries(schema), gold)
        }
        TaskInstance::SentCls(SentClsInstance { id, text, label }) => {
            let schema = need()?;
            let gold = gold_label(id, schema, label)?;
            cls_group(id, TaskKind::SentCls, tokenize(text, STYLE), label_queries(schema), gold)
        }
        other => Err(Error::InvalidInput(format!("{}: not a classification instance", other.id()))),
    }
}

/// Any instance as MRC examples, one per branch (a single one for EQA).
pub fn to_mrc(instance: &TaskInstance, schema: Option<&LabelSchema>) -> Result<Vec<MrcExample>> {
    let group = match instance {
        TaskInstance::Eqa(e) => return Ok(vec![eqa_to_mrc(e)?]),
        TaskInstance::Ner(n) => {
            ner_to_mrc(n, schema.ok_or_else(|| Error::InvalidInput("NER needs a label schema".into()))?)?
        }
        other => cls_to_mrc(other, schema)?,
    };
    Ok(group.branches.into_iter().map(|b| b.example).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerPrediction {
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub score: f64,
}

/// Entities from per-branch decodes (same order as the group's branches).
/// Flat mode keeps the best-scoring span among overlapping ones across
/// labels (ties to the earlier span, then the earlier label).
pub fn mrc_to_ner(group: &InstanceGroup, decoded: &[Vec<DecodedSpan>], mode: Overlap) -> Result<Vec<NerPrediction>> {
    if decoded.len() != group.branches.len() {
        return Err(Error::Shape(format!("{} decodes for {} branches", decoded.len(), group.branches.len())));
    }
    let mut all: Vec<(usize, NerPrediction)> = Vec::new();
    for (k, (b, spans)) in group.branches.iter().zip(decoded).enumerate() {
        for s in spans {
            all.push((k, NerPrediction { start: s.start, end: s.end, label: b.tag.clone(), score: s.score }));
        }
    }
    if mode == Overlap::Flat {
        all.sort_by(|(ka, a), (kb, b)| {
            b.score.total_cmp(&a.score).then(a.start.cmp(&b.start)).then(a.end.cmp(&b.end)).then(ka.cmp(kb))
        });
        let mut kept: Vec<(usize, NerPrediction)> = Vec::new();
        for (k, p) in all {
            if kept.iter().all(|(_, q)| p.end < q.start || q.end < p.start) {
                kept.push((k, p));
            }
        }
        all = kept;
    }
    all.sort_by(|(ka, a), (kb, b)| (a.start, a.end, ka).cmp(&(b.start, b.end, kb)));
    Ok(all.into_iter().map(|(_, p)| p).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClsPrediction {
    pub branch: usize,
    pub tag: String,
    pub relevance: f64,
    /// Best context span of the winning branch, in context word indices.
    pub rationale: Option<DecodedSpan>,
}

/// Index of the highest relevance score, ties to the first.
pub fn argmax_branch(relevance: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, r) in relevance.iter().enumerate() {
        if best.is_none_or(|b| *r > relevance[b]) {
            best = Some(k);
        }
    }
    best
}

/// The branch with the highest relevance, plus its rationale span.
pub fn mrc_to_cls(group: &InstanceGroup, scores: &[ScoreMatrix]) -> Result<ClsPrediction> {
    if scores.is_empty() || scores.len() != group.branches.len() {
        return Err(Error::Shape(format!("{} score matrices for {} branches", scores.len(), group.branches.len())));
    }
    let rel: Vec<f64> = scores.iter().map(ScoreMatrix::relevance).collect();
    let k = argmax_branch(&rel).expect("non-empty");
    let (enc, _) = encode_input(&group.branches[k].example)?;
    if enc.len() != scores[k].len() {
        return Err(Error::Shape(format!("score matrix {} for sequence {}", scores[k].len(), enc.len())));
    }
    let rationale = extract_rationale(&scores[k], &enc.region()).ok();
    Ok(ClsPrediction { branch: k, tag: group.branches[k].tag.clone(), relevance: rel[k], rationale })
}

#[cfg(test)]
mod tests;
