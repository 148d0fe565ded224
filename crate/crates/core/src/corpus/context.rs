use crate::error::{Error, Result};
use crate::example::AnswerSpan;
use crate::ingest::{Anchor, Article};
use crate::text::{char_slice, tokenize_with_offsets, TokenStyle};

/// A tokenized window of sentences `first..=last` from one article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub article_id: u64,
    pub first: usize,
    pub last: usize,
    pub tokens: Vec<String>,
    /// Char offsets of each token relative to the window start.
    pub offsets: Vec<(usize, usize)>,
    /// Char offset of the window in the article text.
    pub char_start: usize,
    pub char_end: usize,
}

impl Window {
    pub fn new(article: &Article, first: usize, last: usize) -> Self {
        let char_start = article.sentences[first].char_start;
        let char_end = article.sentences[last].char_end;
        let toks = tokenize_with_offsets(char_slice(&article.text, char_start, char_end), TokenStyle::Fine);
        Self {
            article_id: article.id,
            first,
            last,
            offsets: toks.iter().map(|t| (t.start, t.end)).collect(),
            tokens: toks.into_iter().map(|t| t.text).collect(),
            char_start,
            char_end,
        }
    }

    /// Window of `w` sentences on each side of sentence `s`, clipped.
    pub fn around(article: &Article, s: usize, w: usize) -> Self {
        let last = (s + w).min(article.sentences.len() - 1);
        Self::new(article, s.saturating_sub(w), last)
    }

    /// Token span covering exactly the anchor's characters.
    pub fn locate(&self, anchor: &Anchor) -> Result<(usize, usize)> {
        let fail = || Error::Alignment(format!("anchor {:?} in article {}", anchor.surface, self.article_id));
        if anchor.char_start < self.char_start || anchor.char_end > self.char_end {
            return Err(fail());
        }
        let (a, b) = (anchor.char_start - self.char_start, anchor.char_end - self.char_start);
        let first = self.offsets.iter().position(|&(s, _)| s == a).ok_or_else(fail)?;
        let last = self.offsets[first..].iter().position(|&(_, e)| e == b).ok_or_else(fail)? + first;
        if self.offsets[first..=last].iter().any(|&(s, e)| s < a || e > b) {
            return Err(fail());
        }
        Ok((first, last))
    }
}

/// Context tokens of the window around the anchor's sentence and the anchor's
/// span within them.
pub fn build_context(mention: &Article, anchor: &Anchor, w: usize) -> Result<(Vec<String>, AnswerSpan)> {
    let s = mention
        .sentence_of(anchor.char_start, anchor.char_end)
        .ok_or_else(|| Error::Alignment(format!("anchor {:?} outside any sentence", anchor.surface)))?;
    let window = Window::around(mention, s, w);
    let (a, b) = window.locate(anchor)?;
    let span = AnswerSpan::from_context(&window.tokens, a, b);
    Ok((window.tokens, span))
}

/// Anchor spans plus every further case-insensitive occurrence of any anchor
/// surface. Anchor spans win; among the remaining candidates the leftmost,
/// then longest, is kept and overlapping ones are discarded.
pub fn label_all_mentions(context: &[String], anchors: &[(usize, usize)]) -> Vec<AnswerSpan> {
    let lowered: Vec<String> = context.iter().map(|t| t.to_lowercase()).collect();
    let mut anchors: Vec<(usize, usize)> = anchors.to_vec();
    anchors.sort_by_key(|&(a, b)| (a, std::cmp::Reverse(b)));
    anchors.dedup();
    let mut kept: Vec<(usize, usize)> = Vec::new();
    let overlaps = |kept: &[(usize, usize)], a: usize, b: usize| kept.iter().any(|&(x, y)| a <= y && x <= b);
    for &(a, b) in &anchors {
        if !overlaps(&kept, a, b) {
            kept.push((a, b));
        }
    }
    let mut surfaces: Vec<&[String]> = kept.iter().map(|&(a, b)| &lowered[a..=b]).collect();
    surfaces.sort();
    surfaces.dedup();
    let mut candidates = Vec::new();
    for s in &surfaces {
        for start in 0..=lowered.len().saturating_sub(s.len()) {
            if lowered[start..start + s.len()] == **s {
                candidates.push((start, start + s.len() - 1));
            }
        }
    }
    candidates.sort_by_key(|&(a, b)| (a, std::cmp::Reverse(b)));
    let fixed = kept.clone();
    for (a, b) in candidates {
        if !overlaps(&kept, a, b) {
            kept.push((a, b));
        }
    }
    debug_assert!(fixed.iter().all(|f| kept.contains(f)));
    kept.sort_unstable();
    kept.into_iter().map(|(a, b)| AnswerSpan::from_context(context, a, b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{extract_anchors, process_article, RawArticle, RawBody, Segmenter};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn art(markup: &str) -> Article {
        let raw = RawArticle { id: 7, title: "M".into(), body: RawBody::Markup(markup.into()) };
        process_article(raw, &Segmenter::default()).0
    }

    fn sentences(n: usize, link_at: usize) -> String {
        (0..n)
            .map(|k| if k == link_at { format!("S{k} has [[Asian Cup]] here.") } else { format!("S{k} plain words.") })
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn left_clip() {
        let a = art(&sentences(2, 0));
        let (ctx, span) = build_context(&a, &a.anchors[0], 2).unwrap();
        assert_eq!(ctx, toks("S0 has Asian Cup here . S1 plain words ."));
        assert_eq!((span.start, span.end, span.text.as_str()), (2, 3, "Asian Cup"));
    }

    #[test]
    fn centered_window() {
        let a = art(&sentences(20, 5));
        let s = a.sentence_of(a.anchors[0].char_start, a.anchors[0].char_end).unwrap();
        assert_eq!(s, 5);
        let (ctx, span) = build_context(&a, &a.anchors[0], 2).unwrap();
        assert_eq!(ctx[0], "S3");
        assert_eq!(ctx.iter().filter(|t| t.starts_with('S')).count(), 5);
        assert_eq!(ctx[ctx.len() - 4], "S7");
        assert_eq!(span.end - span.start, 1);
        assert_eq!(ctx[span.start..=span.end].join(" "), "Asian Cup");
    }

    #[test]
    fn misaligned_anchor_is_an_error() {
        let mut a =
            extract_anchors(RawArticle { id: 1, title: "M".into(), body: RawBody::Markup("xx [[Foo]]bar yy.".into()) });
        a = crate::ingest::segment_sentences(a, &Segmenter::default());
        a.anchors[0].char_end -= 1;
        assert!(matches!(build_context(&a, &a.anchors[0], 2), Err(Error::Alignment(_))));
    }

    #[test]
    fn mention_labelling() {
        let ctx = toks("Japan beat Syria ; japan won");
        assert_eq!(label_all_mentions(&ctx, &[(0, 0)]).len(), 2);
        let once = toks("Japan beat Syria");
        assert_eq!(label_all_mentions(&once, &[(0, 0)]).len(), 1);
        // "a a a" with surface "a a": leftmost wins, the rest cannot fit
        let ctx = toks("x a a a a a");
        let got: Vec<(usize, usize)> = label_all_mentions(&ctx, &[(1, 2)]).iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(got, vec![(1, 2), (3, 4)]);
        // longer surface preferred at the same start
        let ctx = toks("New York , New York City , York");
        let got: Vec<(usize, usize)> =
            label_all_mentions(&ctx, &[(0, 1), (3, 5)]).iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(got, vec![(0, 1), (3, 5)]);
    }
}
