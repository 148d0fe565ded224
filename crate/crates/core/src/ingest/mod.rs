//! Dump ingestion: stream articles, strip link markup into plain text with
//! anchor spans, segment sentences and index inbound links.

mod dump;
mod inlink;
mod markup;
mod records;
mod segment;

use serde::{Deserialize, Serialize};

pub use dump::{DumpFormat, DumpReader, ParseMode};
pub use inlink::{build_inlink_index, build_inlink_index_par, AliasTable, InlinkEntry, InlinkIndex, MentionRef};
pub use markup::{extract_anchors, normalize_title};
pub use records::{read_articles, write_article, ArticleRecord};
pub use segment::{assign_anchors, segment_sentences, Segmenter};

/// One record of a dump before link extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct RawArticle {
    pub id: u64,
    pub title: String,
    pub body: RawBody,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawBody {
    /// Source text with `[[Target|surface]]` link syntax.
    Markup(String),
    /// Already-extracted text with anchor offsets (char offsets, end exclusive).
    Extracted { text: String, anchors: Vec<RawAnchor> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAnchor {
    pub target: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anchor {
    pub target_title: String,
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub word_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Article {
    pub id: u64,
    pub title: String,
    pub text: String,
    /// Sorted by `char_start`, non-overlapping.
    pub anchors: Vec<Anchor>,
    /// Partition `[0, text.chars().count())` in order; empty until segmented.
    pub sentences: Vec<Sentence>,
}

impl Article {
    /// Index of the sentence containing `[start, end)`, if exactly one does.
    pub fn sentence_of(&self, start: usize, end: usize) -> Option<usize> {
        let k = self.sentences.partition_point(|s| s.char_end <= start);
        let s = self.sentences.get(k)?;
        (s.char_start <= start && end <= s.char_end).then_some(k)
    }

    pub fn sentence_text(&self, index: usize) -> &str {
        let s = &self.sentences[index];
        crate::text::char_slice(&self.text, s.char_start, s.char_end)
    }
}

/// Counters accumulated while turning raw records into segmented articles.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub articles: usize,
    pub skipped_records: usize,
    pub anchors: usize,
    pub dropped_anchors: usize,
}

/// Extract, segment and assign anchors for one raw record.
pub fn process_article(raw: RawArticle, segmenter: &Segmenter) -> (Article, usize) {
    let article = extract_anchors(raw);
    let article = segment_sentences(article, segmenter);
    assign_anchors(article)
}
