//! Link markup stripping.
//!
//! Recognised constructs: `[[Target]]`, `[[Target|surface]]` (with a
//! lowercase link trail such as `[[bus]]es`), templates `{{…}}`, tables
//! `{|…|}`, bold/italic quotes, comments, `<ref>` bodies, other inline tags
//! and `== heading ==` lines. Everything else is copied verbatim. Nested or
//! unmatched link brackets lose their decoration and produce no anchor.

use super::{Anchor, Article, RawArticle, RawBody};
use crate::text::char_slice;

const DROPPED_NAMESPACES: &[&str] = &["file", "image", "category", "media"];

/// Canonical form of a link target or article title.
pub fn normalize_title(raw: &str) -> String {
    let raw = raw.split('#').next().unwrap_or("");
    let mut out = String::with_capacity(raw.len());
    for word in raw.split(|c: char| c == '_' || c.is_whitespace()).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    let mut chars = out.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => out,
    }
}

pub fn extract_anchors(raw: RawArticle) -> Article {
    match raw.body {
        RawBody::Markup(markup) => {
            let mut scanner = Scanner::new(true);
            scanner.run(&markup.chars().collect::<Vec<_>>());
            Article { id: raw.id, title: raw.title, text: scanner.out, anchors: scanner.anchors, sentences: Vec::new() }
        }
        RawBody::Extracted { text, mut anchors } => {
            let len = text.chars().count();
            anchors.sort_by_key(|a| (a.start, a.end));
            let mut kept: Vec<Anchor> = Vec::with_capacity(anchors.len());
            for a in anchors {
                let target_title = normalize_title(&a.target);
                if a.start >= a.end || a.end > len || target_title.is_empty() {
                    continue;
                }
                if kept.last().is_some_and(|prev| prev.char_end > a.start) {
                    continue;
                }
                kept.push(Anchor {
                    target_title,
                    surface: char_slice(&text, a.start, a.end).to_string(),
                    char_start: a.start,
                    char_end: a.end,
                });
            }
            Article { id: raw.id, title: raw.title, text, anchors: kept, sentences: Vec::new() }
        }
    }
}

struct Scanner {
    emit_anchors: bool,
    out: String,
    out_len: usize,
    anchors: Vec<Anchor>,
}

fn starts_with(chars: &[char], at: usize, pat: &str) -> bool {
    pat.chars().enumerate().all(|(k, p)| chars.get(at + k) == Some(&p))
}

fn starts_with_ci(chars: &[char], at: usize, pat: &str) -> bool {
    let mut k = at;
    for p in pat.chars() {
        match chars.get(k) {
            Some(c) if c.eq_ignore_ascii_case(&p) => k += 1,
            _ => return false,
        }
    }
    true
}

fn find(chars: &[char], from: usize, pat: &str) -> Option<usize> {
    (from..chars.len()).find(|&k| starts_with(chars, k, pat))
}

/// Position of the closer matching an opener that ends at `from`.
fn find_matching(chars: &[char], from: usize, open: &str, close: &str) -> Option<usize> {
    let mut depth = 1usize;
    let mut k = from;
    while k < chars.len() {
        if starts_with(chars, k, open) {
            depth += 1;
            k += open.len();
        } else if starts_with(chars, k, close) {
            depth -= 1;
            if depth == 0 {
                return Some(k);
            }
            k += close.len();
        } else {
            k += 1;
        }
    }
    None
}

fn is_heading_line(chars: &[char], at: usize) -> Option<usize> {
    let end = (at..chars.len()).find(|&k| chars[k] == '\n').unwrap_or(chars.len());
    let line: String = chars[at..end].iter().collect();
    let t = line.trim();
    (t.len() >= 2 && t.starts_with('=') && t.ends_with('=')).then_some(end)
}

impl Scanner {
    fn new(emit_anchors: bool) -> Self {
        Self { emit_anchors, out: String::new(), out_len: 0, anchors: Vec::new() }
    }

    fn emit(&mut self, s: &str) {
        self.out.push_str(s);
        self.out_len += s.chars().count();
    }

    fn emit_char(&mut self, c: char) {
        self.out.push(c);
        self.out_len += 1;
    }

    fn run(&mut self, chars: &[char]) {
        let mut k = 0;
        let mut line_start = true;
        while k < chars.len() {
            if line_start {
                line_start = false;
                if let Some(end) = is_heading_line(chars, k) {
                    k = (end + 1).min(chars.len());
                    line_start = true;
                    continue;
                }
            }
            let c = chars[k];
            if starts_with(chars, k, "[[") {
                k = self.link(chars, k);
            } else if starts_with(chars, k, "]]") {
                k += 2;
            } else if starts_with(chars, k, "{{") {
                k = find_matching(chars, k + 2, "{{", "}}").map_or(k + 2, |e| e + 2);
            } else if starts_with(chars, k, "{|") {
                k = find_matching(chars, k + 2, "{|", "|}").map_or(k + 2, |e| e + 2);
            } else if starts_with(chars, k, "''") {
                k += if starts_with(chars, k, "'''") { 3 } else { 2 };
            } else if starts_with(chars, k, "<!--") {
                k = find(chars, k + 4, "-->").map_or(chars.len(), |e| e + 3);
            } else if starts_with_ci(chars, k, "<ref") {
                let close = find(chars, k, ">").unwrap_or(chars.len() - 1);
                k = if chars[close - 1] == '/' {
                    close + 1
                } else {
                    (k..chars.len()).find(|&p| starts_with_ci(chars, p, "</ref>")).map_or(chars.len(), |e| e + 6)
                };
            } else if c == '<' && chars.get(k + 1).is_some_and(|n| n.is_ascii_alphabetic() || *n == '/') {
                let close = (k + 1..chars.len().min(k + 200)).find(|&p| chars[p] == '>' || chars[p] == '\n');
                match close {
                    Some(p) if chars[p] == '>' => k = p + 1,
                    _ => {
                        self.emit_char(c);
                        k += 1;
                    }
                }
            } else {
                self.emit_char(c);
                if c == '\n' {
                    line_start = true;
                }
                k += 1;
            }
        }
    }

    /// Handles a link starting at `at` (pointing at `[[`); returns the resume position.
    fn link(&mut self, chars: &[char], at: usize) -> usize {
        let Some(close) = find_matching(chars, at + 2, "[[", "]]") else {
            return at + 2;
        };
        let content = &chars[at + 2..close];
        let mut resume = close + 2;
        if content.windows(2).any(|w| w == ['[', '[']) {
            let mut depth = 0usize;
            let mut pipe = None;
            for (k, w) in content.windows(2).enumerate() {
                match w {
                    ['[', '['] => depth += 1,
                    [']', ']'] => depth = depth.saturating_sub(1),
                    ['|', _] if depth == 0 => {
                        pipe = Some(k);
                        break;
                    }
                    _ => {}
                }
            }
            if pipe.is_none() && content.last() == Some(&'|') && depth == 0 {
                pipe = Some(content.len() - 1);
            }
            let display = pipe.map_or(content, |p| &content[p + 1..]);
            let mut inner = Scanner::new(false);
            inner.run(display);
            self.emit(&inner.out);
            return resume;
        }
        let (target, surface) = match content.iter().position(|&c| c == '|') {
            Some(p) => {
                let last = content.iter().rposition(|&c| c == '|').unwrap_or(p);
                (&content[..p], &content[last + 1..])
            }
            None => (content, content),
        };
        let target: String = target.iter().collect();
        if let Some((ns, _)) = target.split_once(':') {
            if DROPPED_NAMESPACES.contains(&ns.trim().to_lowercase().as_str()) {
                return resume;
            }
        }
        let mut flat = Scanner::new(false);
        flat.run(surface);
        let mut surface = flat.out;
        while let Some(&c) = chars.get(resume) {
            if !c.is_ascii_lowercase() {
                break;
            }
            surface.push(c);
            resume += 1;
        }
        let normalized = if target.contains(':') { String::new() } else { normalize_title(&target) };
        let trimmed = surface.trim();
        if !self.emit_anchors || normalized.is_empty() || trimmed.is_empty() {
            self.emit(&surface);
            return resume;
        }
        let lead = surface.len() - surface.trim_start().len();
        self.emit(&surface[..lead]);
        let start = self.out_len;
        self.emit(trimmed);
        self.anchors.push(Anchor {
            target_title: normalized,
            surface: trimmed.to_string(),
            char_start: start,
            char_end: self.out_len,
        });
        self.emit(&surface[lead + trimmed.len()..]);
        resume
    }
}
