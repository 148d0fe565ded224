use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::ingest::Article;
use crate::text::{char_slice, normalize_token, tokenize, TokenStyle};

pub const ANON_TOKEN: &str = "it";

/// Lead sentences of the definition article: at least `initial` of them,
/// extended until the running word count reaches `min_words` or the article
/// runs out.
pub fn build_query(definition: &Article, initial: usize, min_words: usize) -> Result<Vec<String>> {
    let sentences = &definition.sentences;
    if sentences.is_empty() {
        return Err(Error::EmptyDefinition(definition.title.clone()));
    }
    let mut t = initial.clamp(1, sentences.len());
    let mut words: usize = sentences[..t].iter().map(|s| s.word_count).sum();
    while words < min_words && t < sentences.len() {
        words += sentences[t].word_count;
        t += 1;
    }
    Ok(sentence_tokens(definition, 0, t - 1))
}

/// Tokens of sentences `first..=last`.
pub fn sentence_tokens(article: &Article, first: usize, last: usize) -> Vec<String> {
    let start = article.sentences[first].char_start;
    let end = article.sentences[last].char_end;
    tokenize(char_slice(&article.text, start, end), TokenStyle::Fine)
}

fn title_bag(title: &str) -> HashMap<String, usize> {
    let mut bag = HashMap::new();
    for t in tokenize(title, TokenStyle::Fine) {
        let n = normalize_token(&t);
        if !n.is_empty() && n != ANON_TOKEN {
            *bag.entry(n).or_insert(0) += 1;
        }
    }
    bag
}

/// Maximal runs of tokens that occur in the title, as half-open ranges.
fn title_runs(tokens: &[String], bag: &HashMap<String, usize>) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut k = 0;
    while k < tokens.len() {
        if bag.contains_key(&normalize_token(&tokens[k])) {
            let start = k;
            while k < tokens.len() && bag.contains_key(&normalize_token(&tokens[k])) {
                k += 1;
            }
            runs.push((start, k));
        } else {
            k += 1;
        }
    }
    runs
}

/// Share of the run covered by the title, counting repeated words at most as
/// often as the title has them.
fn overlap_ratio(run: &[String], bag: &HashMap<String, usize>) -> f64 {
    let mut left = bag.clone();
    let mut hit = 0usize;
    for t in run {
        if let Some(c) = left.get_mut(&normalize_token(t)) {
            if *c > 0 {
                *c -= 1;
                hit += 1;
            }
        }
    }
    hit as f64 / run.len() as f64
}

/// Replaces each maximal title run whose overlap ratio exceeds `threshold`
/// with "it". Idempotent: "it" itself never takes part in a run.
pub fn anonymize_query(tokens: &[String], title: &str, threshold: f64) -> Vec<String> {
    let bag = title_bag(title);
    if bag.is_empty() {
        return tokens.to_vec();
    }
    let mut out = Vec::with_capacity(tokens.len());
    let mut k = 0;
    for (a, b) in title_runs(tokens, &bag) {
        out.extend_from_slice(&tokens[k..a]);
        if overlap_ratio(&tokens[a..b], &bag) > threshold {
            out.push(ANON_TOKEN.to_string());
        } else {
            out.extend_from_slice(&tokens[a..b]);
        }
        k = b;
    }
    out.extend_from_slice(&tokens[k..]);
    out
}

/// Largest overlap ratio over the maximal title runs left in `tokens`.
pub fn max_title_overlap(tokens: &[String], title: &str) -> f64 {
    let bag = title_bag(title);
    title_runs(tokens, &bag).into_iter().map(|(a, b)| overlap_ratio(&tokens[a..b], &bag)).fold(0.0, f64::max)
}

/// Whether some token span of `context` equals the title, case-insensitively.
pub fn contains_title(context: &[String], title: &str) -> bool {
    let title: Vec<String> = tokenize(title, TokenStyle::Fine).iter().map(|t| t.to_lowercase()).collect();
    if title.is_empty() || title.len() > context.len() {
        return false;
    }
    let lowered: Vec<String> = context.iter().map(|t| t.to_lowercase()).collect();
    lowered.windows(title.len()).any(|w| w == title.as_slice())
}

pub(crate) fn distinct_terms(tokens: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    tokens.iter().map(|t| normalize_token(t)).filter(|t| !t.is_empty() && seen.insert(t.clone())).collect()
}
