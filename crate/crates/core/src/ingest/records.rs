//! JSON-lines article records, the output schema of ingestion.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{
    assign_anchors, extract_anchors, segment_sentences, Article, RawAnchor, RawArticle, RawBody, Segmenter, Sentence,
};
use crate::error::{Error, Result};
use crate::text::{char_slice, count_tokens, TokenStyle};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub id: u64,
    pub title: String,
    pub text: String,
    pub anchors: Vec<RawAnchor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<SentenceRecord>>,
}

impl From<&Article> for ArticleRecord {
    fn from(a: &Article) -> Self {
        Self {
            id: a.id,
            title: a.title.clone(),
            text: a.text.clone(),
            anchors: a
                .anchors
                .iter()
                .map(|x| RawAnchor { target: x.target_title.clone(), start: x.char_start, end: x.char_end })
                .collect(),
            sentences: Some(
                a.sentences.iter().map(|s| SentenceRecord { start: s.char_start, end: s.char_end }).collect(),
            ),
        }
    }
}

impl ArticleRecord {
    /// Rebuilds an article. Stored sentences are kept when they partition the
    /// text; otherwise the text is segmented again.
    pub fn into_article(self, segmenter: &Segmenter) -> (Article, usize) {
        let sentences = self.sentences;
        let raw = RawArticle {
            id: self.id,
            title: self.title,
            body: RawBody::Extracted { text: self.text, anchors: self.anchors },
        };
        let mut article = extract_anchors(raw);
        let len = article.text.chars().count();
        let valid = sentences.as_ref().is_some_and(|ss| {
            let mut pos = 0;
            ss.iter().all(|s| {
                let ok = s.start == pos && s.end > s.start;
                pos = s.end;
                ok
            }) && pos == len
        });
        if valid {
            article.sentences = sentences
                .unwrap_or_default()
                .into_iter()
                .enumerate()
                .map(|(index, s)| Sentence {
                    index,
                    char_start: s.start,
                    char_end: s.end,
                    word_count: count_tokens(char_slice(&article.text, s.start, s.end), TokenStyle::Fine),
                })
                .collect();
        } else {
            article = segment_sentences(article, segmenter);
        }
        assign_anchors(article)
    }
}

pub fn write_article<W: Write>(out: &mut W, article: &Article) -> Result<()> {
    serde_json::to_writer(&mut *out, &ArticleRecord::from(article))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads article records written by [`write_article`].
pub fn read_articles<R: BufRead>(input: R, segmenter: &Segmenter) -> Result<Vec<Article>> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ArticleRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord { record: k + 1, reason: e.to_string() })?;
        out.push(rec.into_article(segmenter).0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::process_article;

    #[test]
    fn record_round_trip() {
        let seg = Segmenter::default();
        let raw = RawArticle {
            id: 3,
            title: "Silicon".into(),
            body: RawBody::Markup("Pure [[Silicon]] is grey. It is used in [[Chip|chips]].".into()),
        };
        let (article, _) = process_article(raw, &seg);
        let mut buf = Vec::new();
        write_article(&mut buf, &article).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert!(line.contains(r#""sentences":[{"start":0,"end":22},{"start":22,"end":42}]"#), "{line}");
        let back = read_articles(buf.as_slice(), &seg).unwrap();
        assert_eq!(back, vec![article]);
    }
}
