//! Rule-based sentence segmentation.
//!
//! A sentence ends after a run of `.`/`?`/`!` (plus any closing quotes or
//! brackets) when it is followed by whitespace and the next visible
//! character is not lowercase. A lone period after a listed abbreviation or
//! an initial does not end a sentence, and no boundary is placed inside an
//! anchor span. Sentences partition the text: trailing whitespace belongs to
//! the sentence it follows.

use super::{Article, Sentence};
use crate::text::{count_tokens, Abbreviations, TokenStyle};

#[derive(Debug, Clone, Default)]
pub struct Segmenter {
    pub abbreviations: Abbreviations,
}

impl Segmenter {
    pub fn new(abbreviations: Abbreviations) -> Self {
        Self { abbreviations }
    }

    /// Sentence start offsets (chars) after the first, given anchor spans to protect.
    pub fn boundaries(&self, chars: &[char], protected: &[(usize, usize)]) -> Vec<usize> {
        let len = chars.len();
        let mut out = Vec::new();
        let mut k = 0;
        while k < len {
            if !is_terminator(chars[k]) {
                k += 1;
                continue;
            }
            let term_start = k;
            while k < len && is_terminator(chars[k]) {
                k += 1;
            }
            let run_len = k - term_start;
            while k < len && is_closer(chars[k]) {
                k += 1;
            }
            if k == len || !chars[k].is_whitespace() {
                continue;
            }
            let mut next = k;
            while next < len && chars[next].is_whitespace() {
                next += 1;
            }
            if next == len || chars[next].is_lowercase() {
                k = next;
                continue;
            }
            if run_len == 1 && chars[term_start] == '.' {
                let word_start = (0..term_start).rev().find(|&p| chars[p].is_whitespace()).map_or(0, |p| p + 1);
                if self.abbreviations.matches(&chars[word_start..=term_start]) {
                    k = next;
                    continue;
                }
            }
            let first = protected.partition_point(|&(_, end)| end <= term_start + 1);
            if protected.get(first).is_some_and(|&(start, _)| start < next) {
                k = next;
                continue;
            }
            out.push(next);
            k = next;
        }
        out
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}' | '\u{bb}')
}

pub fn segment_sentences(mut article: Article, segmenter: &Segmenter) -> Article {
    let chars: Vec<char> = article.text.chars().collect();
    article.sentences.clear();
    if chars.is_empty() {
        return article;
    }
    let protected: Vec<(usize, usize)> = article.anchors.iter().map(|a| (a.char_start, a.char_end)).collect();
    let mut starts = vec![0];
    starts.extend(segmenter.boundaries(&chars, &protected));
    let mut sentences = Vec::with_capacity(starts.len());
    for (index, &start) in starts.iter().enumerate() {
        let end = starts.get(index + 1).copied().unwrap_or(chars.len());
        let body: String = chars[start..end].iter().collect();
        sentences.push(Sentence {
            index,
            char_start: start,
            char_end: end,
            word_count: count_tokens(&body, TokenStyle::Fine),
        });
    }
    article.sentences = sentences;
    article
}

/// Drops anchors that do not lie inside exactly one sentence; returns the
/// article and the number dropped.
pub fn assign_anchors(mut article: Article) -> (Article, usize) {
    let before = article.anchors.len();
    let anchors = std::mem::take(&mut article.anchors);
    article.anchors = anchors.into_iter().filter(|a| article.sentence_of(a.char_start, a.char_end).is_some()).collect();
    let dropped = before - article.anchors.len();
    (article, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{extract_anchors, RawArticle, RawBody};

    fn seg(text: &str, abbr: Abbreviations) -> Vec<String> {
        let a = Article { id: 0, title: "t".into(), text: text.into(), anchors: vec![], sentences: vec![] };
        let a = segment_sentences(a, &Segmenter::new(abbr));
        (0..a.sentences.len()).map(|k| a.sentence_text(k).to_string()).collect()
    }

    #[test]
    fn splits_initials_without_abbreviations() {
        assert_eq!(seg("A. B. C.", Abbreviations::none()), ["A. ", "B. ", "C."]);
    }

    #[test]
    fn abbreviation_suppresses_split() {
        assert_eq!(seg("Dr. Smith arrived.", Abbreviations::default()), ["Dr. Smith arrived."]);
        assert_eq!(seg("Dr. Smith arrived.", Abbreviations::none()), ["Dr. ", "Smith arrived."]);
    }

    #[test]
    fn empty_text_has_no_sentences() {
        assert!(seg("", Abbreviations::default()).is_empty());
    }

    #[test]
    fn terminators_closers_and_lowercase() {
        let s = seg("Is it? \"Yes!\" He left. then stayed... Ok", Abbreviations::default());
        assert_eq!(s, ["Is it? ", "\"Yes!\" ", "He left. then stayed... ", "Ok"]);
    }

    #[test]
    fn never_splits_inside_an_anchor() {
        let raw = RawArticle {
            id: 0,
            title: "t".into(),
            body: RawBody::Markup("See [[Foo|Stop. Go]] now. Next one.".into()),
        };
        let a = segment_sentences(extract_anchors(raw), &Segmenter::default());
        let texts: Vec<_> = (0..a.sentences.len()).map(|k| a.sentence_text(k)).collect();
        assert_eq!(texts, ["See Stop. Go now. ", "Next one."]);
        let (a, dropped) = assign_anchors(a);
        assert_eq!(dropped, 0);
        assert_eq!(a.anchors.len(), 1);
    }

    #[test]
    fn straddling_anchor_is_dropped() {
        let plain = Article {
            id: 0,
            title: "t".into(),
            text: "One two. Three four.".into(),
            anchors: vec![],
            sentences: vec![],
        };
        let mut a = segment_sentences(plain, &Segmenter::default());
        assert_eq!(a.sentences.len(), 2);
        a.anchors = vec![crate::ingest::Anchor {
            target_title: "X".into(),
            surface: "two. Three".into(),
            char_start: 4,
            char_end: 14,
        }];
        let (a, dropped) = assign_anchors(a);
        assert_eq!(dropped, 1);
        assert!(a.anchors.is_empty());
    }

    #[test]
    fn word_counts_use_fine_tokens() {
        let a =
            Article { id: 0, title: "t".into(), text: "Hello, world. Bye.".into(), anchors: vec![], sentences: vec![] };
        let a = segment_sentences(a, &Segmenter::default());
        let counts: Vec<_> = a.sentences.iter().map(|s| s.word_count).collect();
        assert_eq!(counts, [4, 2]);
    }
}
