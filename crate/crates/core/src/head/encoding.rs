use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::example::MrcExample;

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// `[CLS] query [SEP] context [SEP]`.
///
/// `sep` is the index of the separator that precedes the context, so context
/// word `k` sits at sequence position `sep + 1 + k`, and the trailing
/// separator is the last position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputEncoding {
    pub tokens: Vec<String>,
    pub sep: usize,
}

/// Cells `(i, j)` with `sep < i <= j <= len - 2`: spans made only of
/// context tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegalRegion {
    pub sep: usize,
    pub len: usize,
}

impl LegalRegion {
    pub fn new(sep: usize, len: usize) -> Self {
        Self { sep, len }
    }

    pub fn first(&self) -> usize {
        self.sep + 1
    }

    /// Last legal position (inclusive); the trailing separator is excluded.
    pub fn last(&self) -> Option<usize> {
        (self.len >= self.sep + 3).then(|| self.len - 2)
    }

    pub fn context_len(&self) -> usize {
        self.len.saturating_sub(self.sep + 2)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.last().is_some_and(|last| self.sep < i && i <= j && j <= last)
    }

    pub fn cell_count(&self) -> usize {
        let n = self.context_len();
        n * (n + 1) / 2
    }

    /// Legal cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> {
        let first = self.first();
        let last = self.last();
        (first..=last.unwrap_or(0))
            .filter(move |_| last.is_some())
            .flat_map(move |i| (i..=last.unwrap_or(0)).map(move |j| (i, j)))
    }

    pub fn to_context(&self, i: usize) -> usize {
        i - self.sep - 1
    }

    pub fn to_sequence(&self, k: usize) -> usize {
        self.sep + 1 + k
    }
}

impl InputEncoding {
    pub fn new(query: &[String], context: &[String]) -> Result<Self> {
        if query.is_empty() || context.is_empty() {
            return Err(Error::InvalidInput("query and context must be non-empty".into()));
        }
        let mut tokens = Vec::with_capacity(query.len() + context.len() + 3);
        tokens.push(CLS.to_string());
        tokens.extend(query.iter().cloned());
        tokens.push(SEP.to_string());
        let sep = tokens.len() - 1;
        tokens.extend(context.iter().cloned());
        tokens.push(SEP.to_string());
        Ok(Self { tokens, sep })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn region(&self) -> LegalRegion {
        LegalRegion::new(self.sep, self.len())
    }
}

/// Relevance bit plus positive span cells in sequence coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TargetMatrix {
    pub y_cls: bool,
    pub positives: BTreeSet<(usize, usize)>,
}

impl TargetMatrix {
    /// Positives must be legal, and only relevant pairs may have them. A
    /// relevant pair without span positives is a classification target.
    pub fn validate(&self, region: &LegalRegion) -> Result<()> {
        if let Some(&(i, j)) = self.positives.iter().find(|&&(i, j)| !region.contains(i, j)) {
            return Err(Error::IllegalTarget(i, j));
        }
        if !self.y_cls && !self.positives.is_empty() {
            return Err(Error::InvalidInput("span positives on an irrelevant pair".into()));
        }
        Ok(())
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        self.positives.contains(&(i, j))
    }
}

/// Lays out an example and shifts its answers into sequence coordinates.
pub fn encode_input(example: &MrcExample) -> Result<(InputEncoding, TargetMatrix)> {
    let enc = InputEncoding::new(&example.query, &example.context)?;
    let region = enc.region();
    let positives = example.answers.iter().map(|a| (region.to_sequence(a.start), region.to_sequence(a.end))).collect();
    let targets = TargetMatrix { y_cls: example.answerable, positives };
    targets.validate(&region)?;
    Ok((enc, targets))
}
