//! The (query, context, answers) record shared by corpus construction, the
//! scoring head and the task adapters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An answer as inclusive word indices into the context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl AnswerSpan {
    pub fn from_context(context: &[String], start: usize, end: usize) -> Self {
        Self { start, end, text: context[start..=end].join(" ") }
    }

    pub fn overlaps(&self, other: &AnswerSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// Article the query was drawn from.
    pub definition: Option<u64>,
    /// Article the context window was drawn from.
    pub mention: Option<u64>,
    /// Pairing strategy or task kind that produced the example.
    pub strategy: String,
    /// Inclusive sentence range of the context window in the mention article.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrcExample {
    pub id: String,
    pub entity: String,
    pub query: Vec<String>,
    pub context: Vec<String>,
    pub answers: Vec<AnswerSpan>,
    pub answerable: bool,
    pub prov: Provenance,
}

impl MrcExample {
    /// Every answer lies inside the context and re-slices to its text.
    pub fn check_alignment(&self) -> Result<()> {
        for a in &self.answers {
            if a.start > a.end || a.end >= self.context.len() {
                return Err(Error::Alignment(format!(
                    "{}: span ({}, {}) outside context of {} tokens",
                    self.id,
                    a.start,
                    a.end,
                    self.context.len()
                )));
            }
            let slice = self.context[a.start..=a.end].join(" ");
            if slice != a.text {
                return Err(Error::Alignment(format!(
                    "{}: span text {:?} != context slice {:?}",
                    self.id, a.text, slice
                )));
            }
        }
        Ok(())
    }

    /// Span-extraction examples are answerable exactly when they have answers.
    pub fn check_answerability(&self) -> Result<()> {
        if self.answerable != !self.answers.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{}: answerable={} with {} answers",
                self.id,
                self.answerable,
                self.answers.len()
            )));
        }
        Ok(())
    }

    pub fn word_count(&self) -> usize {
        self.query.len() + self.context.len()
    }
}
