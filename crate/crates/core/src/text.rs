//! Canonical word tokenizer and the abbreviation list shared with the
//! sentence segmenter.
//!
//! Two tokenization styles are provided:
//!
//! * [`TokenStyle::Fine`] splits whitespace, then peels every leading and
//!   trailing punctuation character into its own token. Used for corpus
//!   construction, where anchor boundaries must fall on token boundaries.
//! * [`TokenStyle::Terminal`] splits whitespace and peels only trailing
//!   sentence terminators (`.`, `?`, `!`). Internal and bracketing
//!   punctuation stays attached (`(NFL)`, `here,`). This is the rendering
//!   used by the downstream task formats.
//!
//! Both styles split a trailing `'s` clitic and keep the period of a known
//! abbreviation or initialism (`Dr.`, `U.S.`). Offsets are counted in
//! Unicode scalar values.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Char offset of the first character.
    pub start: usize,
    /// Char offset one past the last character.
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenStyle {
    #[default]
    Fine,
    Terminal,
}

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "vs", "etc", "e.g", "i.e", "cf", "inc", "ltd", "co",
    "corp", "bros", "no", "nos", "vol", "vols", "pp", "ed", "eds", "gen", "col", "lt", "sgt", "capt", "cmdr", "adm",
    "gov", "sen", "rep", "rev", "hon", "pres", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct",
    "nov", "dec", "approx", "ca", "c", "est", "dept", "univ", "assn", "fig", "al",
];

/// Abbreviations whose trailing period does not end a sentence or a token.
#[derive(Debug, Clone)]
pub struct Abbreviations {
    words: HashSet<String>,
    initials: bool,
}

impl Default for Abbreviations {
    fn default() -> Self {
        Self { words: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(), initials: true }
    }
}

impl Abbreviations {
    /// No abbreviation exceptions at all, not even single-letter initials.
    pub fn none() -> Self {
        Self { words: HashSet::new(), initials: false }
    }

    pub fn with_words<I, S>(words: I, initials: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { words: words.into_iter().map(|w| w.into().to_lowercase()).collect(), initials }
    }

    /// `word` is the token including its trailing period.
    pub fn matches(&self, word: &[char]) -> bool {
        let Some((&'.', body)) = word.split_last() else {
            return false;
        };
        let start = body.iter().position(|c| c.is_alphanumeric()).unwrap_or(body.len());
        let body = &body[start..];
        if body.is_empty() {
            return false;
        }
        if self.initials && is_initialism(body) {
            return true;
        }
        let lower: String = body.iter().flat_map(|c| c.to_lowercase()).collect();
        self.words.contains(&lower)
    }
}

/// `U.S` / `J` / `e.g` (the final period already removed).
fn is_initialism(body: &[char]) -> bool {
    body.iter().enumerate().all(|(k, c)| if k % 2 == 0 { c.is_alphabetic() } else { *c == '.' })
        && body.len() % 2 == 1
        && (body.len() == 1 && body[0].is_uppercase() || body.len() > 1)
}

fn default_abbreviations() -> &'static Abbreviations {
    static ABBR: OnceLock<Abbreviations> = OnceLock::new();
    ABBR.get_or_init(Abbreviations::default)
}

pub fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_clitic(chunk: &[char]) -> bool {
    matches!(chunk, ['\'' | '\u{2019}', 's' | 'S'] | ['n', '\'' | '\u{2019}', 't'])
}

pub fn tokenize(text: &str, style: TokenStyle) -> Vec<String> {
    tokenize_with_offsets(text, style).into_iter().map(|t| t.text).collect()
}

pub fn tokenize_with_offsets(text: &str, style: TokenStyle) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        if chars[k].is_whitespace() {
            k += 1;
            continue;
        }
        let start = k;
        while k < chars.len() && !chars[k].is_whitespace() {
            k += 1;
        }
        split_chunk(&chars, start, k, style, &mut out);
    }
    out
}

/// Number of tokens [`tokenize`] would produce.
pub fn count_tokens(text: &str, style: TokenStyle) -> usize {
    tokenize_with_offsets(text, style).len()
}

fn push(out: &mut Vec<Token>, chars: &[char], start: usize, end: usize) {
    out.push(Token { text: chars[start..end].iter().collect(), start, end });
}

fn split_chunk(chars: &[char], mut a: usize, b: usize, style: TokenStyle, out: &mut Vec<Token>) {
    if is_clitic(&chars[a..b]) {
        push(out, chars, a, b);
        return;
    }
    let abbr = default_abbreviations();
    if style == TokenStyle::Fine {
        while b - a > 1 && is_punct(chars[a]) {
            push(out, chars, a, a + 1);
            a += 1;
        }
    }
    let mut e = b;
    while e > a + 1 {
        let c = chars[e - 1];
        let peel = match style {
            TokenStyle::Fine => is_punct(c),
            TokenStyle::Terminal => is_terminator(c),
        };
        if !peel || (c == '.' && abbr.matches(&chars[a..e])) {
            break;
        }
        e -= 1;
    }
    if e - a > 2 && is_clitic(&chars[e - 2..e]) {
        push(out, chars, a, e - 2);
        push(out, chars, e - 2, e);
    } else {
        push(out, chars, a, e);
    }
    for k in e..b {
        push(out, chars, k, k + 1);
    }
}

/// Lowercased token with punctuation removed; used for loose comparisons.
pub fn normalize_token(token: &str) -> String {
    token.chars().filter(|c| !is_punct(*c)).flat_map(|c| c.to_lowercase()).collect()
}

/// Char-offset slicing.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut it = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let bs = it.nth(start).unwrap_or(text.len());
    let be = if end > start { it.nth(end - start - 1).unwrap_or(text.len()) } else { bs };
    &text[bs..be]
}
