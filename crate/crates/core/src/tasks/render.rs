//! Worked-example display: `[CLS] Q [SEP] [SEP] C [SEP]` with answers as
//! 1-based positions in that display sequence.

use crate::example::MrcExample;
use crate::head::{CLS, SEP};

pub const EMPTY_ANSWER: &str = "\u{2205}";

/// Display position of context word `k` after a query of `query_len` words.
pub fn display_index(query_len: usize, k: usize) -> usize {
    query_len + 4 + k
}

pub fn render_input(example: &MrcExample) -> String {
    format!("{CLS} {} {SEP} {SEP} {} {SEP}", example.query.join(" "), example.context.join(" "))
}

/// `∅`, `(0,0) - "[CLS]"` for a relevant branch without spans, or the
/// answers as `(i,j) - "text"` joined by `; `.
pub fn render_gold(example: &MrcExample) -> String {
    if !example.answerable {
        return EMPTY_ANSWER.to_string();
    }
    if example.answers.is_empty() {
        return format!("(0,0) - \"{CLS}\"");
    }
    let q = example.query.len();
    example
        .answers
        .iter()
        .map(|a| format!("({},{}) - \"{}\"", display_index(q, a.start), display_index(q, a.end), a.text))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Input and gold separated by a tab.
pub fn render_row(example: &MrcExample) -> String {
    format!("{}\t{}", render_input(example), render_gold(example))
}
