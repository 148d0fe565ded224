//! Converters between downstream task formats and MRC examples.
//!
//! NER labels become one query each and their entities become answers.
//! Classification labels (or multiple-choice options) become one branch each;
//! the gold branch is marked relevant and has no span answers.

mod convert;
mod formats;
mod render;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use convert::{
    argmax_branch, choice_tag, cls_to_mrc, eqa_to_mrc, mcqa_query, mrc_to_cls, mrc_to_ner, ner_query, ner_to_mrc,
    pair_context, to_mrc, ClsPrediction, NerPrediction,
};
pub use formats::{read_cls_jsonl, read_conll, read_eqa, read_tasks};
pub use render::{display_index, render_gold, render_input, render_row};

use crate::error::{Error, Result};
use crate::example::MrcExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Ner,
    Eqa,
    Mcqa,
    PairCls,
    SentCls,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Ner => "ner",
            TaskKind::Eqa => "eqa",
            TaskKind::Mcqa => "mcqa",
            TaskKind::PairCls => "paircls",
            TaskKind::SentCls => "sentcls",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ner" => TaskKind::Ner,
            "eqa" => TaskKind::Eqa,
            "mcqa" => TaskKind::Mcqa,
            "paircls" => TaskKind::PairCls,
            "sentcls" => TaskKind::SentCls,
            other => return Err(Error::InvalidInput(format!("unknown task kind {other:?}"))),
        })
    }
}

/// An entity as inclusive token indices plus label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerInstance {
    pub id: String,
    pub tokens: Vec<String>,
    pub entities: Vec<Entity>,
}

/// A gold answer as text plus its char offset in the context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqaAnswer {
    pub text: String,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqaInstance {
    pub id: String,
    pub question: String,
    pub context: String,
    /// Empty for unanswerable questions.
    pub answers: Vec<EqaAnswer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqaInstance {
    pub id: String,
    pub question: String,
    pub context: String,
    pub choices: Vec<String>,
    /// Index of the correct choice.
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairClsInstance {
    pub id: String,
    pub hypothesis: String,
    pub premise: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentClsInstance {
    pub id: String,
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TaskInstance {
    Ner(NerInstance),
    Eqa(EqaInstance),
    Mcqa(McqaInstance),
    PairCls(PairClsInstance),
    SentCls(SentClsInstance),
}

impl TaskInstance {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskInstance::Ner(_) => TaskKind::Ner,
            TaskInstance::Eqa(_) => TaskKind::Eqa,
            TaskInstance::Mcqa(_) => TaskKind::Mcqa,
            TaskInstance::PairCls(_) => TaskKind::PairCls,
            TaskInstance::SentCls(_) => TaskKind::SentCls,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            TaskInstance::Ner(i) => &i.id,
            TaskInstance::Eqa(i) => &i.id,
            TaskInstance::Mcqa(i) => &i.id,
            TaskInstance::PairCls(i) => &i.id,
            TaskInstance::SentCls(i) => &i.id,
        }
    }
}

/// Ordered label names with their query text. For NER the text is the label
/// description; for classification it is the whole query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSchema {
    entries: Vec<(String, String)>,
}

impl LabelSchema {
    pub fn new<I, A, B>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let entries: Vec<(String, String)> = entries.into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        let mut seen = HashSet::new();
        for (name, text) in &entries {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate label {name:?}")));
            }
            if text.trim().is_empty() {
                return Err(Error::InvalidInput(format!("label {name:?} has an empty description")));
            }
        }
        Ok(Self { entries })
    }

    /// Parses a JSON object mapping label to text; key order is kept.
    pub fn from_json(s: &str) -> Result<Self> {
        let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(s)?;
        let mut entries = Vec::with_capacity(map.len());
        for (k, v) in map {
            match v {
                serde_json::Value::String(t) => entries.push((k, t)),
                other => return Err(Error::InvalidInput(format!("label {k:?}: expected a string, got {other}"))),
            }
        }
        Self::new(entries)
    }

    pub fn to_json(&self) -> String {
        let map: serde_json::Map<String, serde_json::Value> =
            self.entries.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
        serde_json::to_string_pretty(&map).expect("string map serializes")
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    /// CoNLL-2003 entity types.
    pub fn conll() -> Self {
        Self::new([
            ("ORG", "Organization entities are limited to named corporate, governmental, or other organizational entities."),
            ("PER", "Person entities are named persons or family ."),
            (
                "LOC",
                "Location entities are the name of politically or geographically defined locations such as cities , countries .",
            ),
            (
                "MISC",
                "Examples of miscellaneous entities include events , nationalities , products and works of art .",
            ),
        ])
        .expect("built-in schema is valid")
    }

    /// Binary sentiment.
    pub fn sst2() -> Self {
        Self::new([("Negative", "Negative , feeling not good ."), ("Positive", "Positive , having a good feeling .")])
            .expect("built-in schema is valid")
    }

    /// Three-way entailment.
    pub fn mnli() -> Self {
        Self::new([
            (
                "Neutral",
                "Neutral. The hypothesis is a sentence with mostly the same lexical items as the premise but a different meaning .",
            ),
            ("Entailment", "Entailment . The hypothesis is a sentence with a similar meaning as the premise ."),
            ("Contradiction", "Contradiction . The hypothesis is a sentence with a contradictory meaning to the premise ."),
        ])
        .expect("built-in schema is valid")
    }

    /// Default templates for a task kind, if it uses labels.
    pub fn default_for(kind: TaskKind) -> Option<Self> {
        match kind {
            TaskKind::Ner => Some(Self::conll()),
            TaskKind::SentCls => Some(Self::sst2()),
            TaskKind::PairCls => Some(Self::mnli()),
            TaskKind::Eqa | TaskKind::Mcqa => None,
        }
    }
}

/// One MRC example per label or choice of a task instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub tag: String,
    pub gold: bool,
    pub example: MrcExample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceGroup {
    pub instance_id: String,
    pub kind: TaskKind,
    pub branches: Vec<Branch>,
}

impl InstanceGroup {
    pub fn gold_count(&self) -> usize {
        self.branches.iter().filter(|b| b.gold).count()
    }
}
