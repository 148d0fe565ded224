use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::encoding::LegalRegion;
use super::score::ScoreMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overlap {
    /// Greedy, score-descending, non-overlapping selection.
    #[default]
    Flat,
    /// Keep every span above threshold.
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Multi { threshold: f64, overlap: Overlap },
    Single,
}

impl DecodeMode {
    pub const DEFAULT_THRESHOLD: f64 = 0.5;

    pub fn multi(overlap: Overlap) -> Self {
        DecodeMode::Multi { threshold: Self::DEFAULT_THRESHOLD, overlap }
    }
}

/// A span in context word coordinates (inclusive) with its probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedSpan {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

impl DecodedSpan {
    pub fn overlaps(&self, other: &DecodedSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Higher score first, then smaller start, then smaller end.
pub fn rank_order(a: &DecodedSpan, b: &DecodedSpan) -> Ordering {
    b.score.total_cmp(&a.score).then(a.start.cmp(&b.start)).then(a.end.cmp(&b.end))
}

fn legal_spans<'a>(scores: &'a ScoreMatrix, region: &'a LegalRegion) -> impl Iterator<Item = DecodedSpan> + 'a {
    let region = *region;
    region.cells().map(move |(i, j)| DecodedSpan {
        start: region.to_context(i),
        end: region.to_context(j),
        score: scores.prob(i, j),
    })
}

/// Decoded spans sorted by `(start, end)`. An empty list means "no answer".
pub fn decode_spans(scores: &ScoreMatrix, region: &LegalRegion, mode: DecodeMode) -> Vec<DecodedSpan> {
    match mode {
        DecodeMode::Single => legal_spans(scores, region).min_by(rank_order).into_iter().collect(),
        DecodeMode::Multi { threshold, overlap } => {
            let above: Vec<DecodedSpan> = legal_spans(scores, region).filter(|s| s.score > threshold).collect();
            let mut out = match overlap {
                Overlap::Nested => above,
                Overlap::Flat => select_non_overlapping(above),
            };
            out.sort_by_key(|s| (s.start, s.end));
            out
        }
    }
}

/// Greedy selection in [`rank_order`]; each kept span overlaps no earlier one.
pub fn select_non_overlapping(mut spans: Vec<DecodedSpan>) -> Vec<DecodedSpan> {
    spans.sort_by(rank_order);
    let mut kept: Vec<DecodedSpan> = Vec::new();
    for s in spans {
        if kept.iter().all(|k| !k.overlaps(&s)) {
            kept.push(s);
        }
    }
    kept
}

/// Highest-scoring legal span; ties go to the smallest `(start, end)`.
pub fn extract_rationale(scores: &ScoreMatrix, region: &LegalRegion) -> Result<DecodedSpan> {
    legal_spans(scores, region).min_by(rank_order).ok_or(Error::NoLegalCells(region.len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::matrix::Matrix;

    fn scores(m: usize, cells: &[((usize, usize), f64)]) -> ScoreMatrix {
        let mut p = Matrix::filled(m, m, 0.1);
        for &((i, j), v) in cells {
            p[(i, j)] = v;
        }
        ScoreMatrix::from_probs(&p).unwrap()
    }

    #[test]
    fn nothing_above_threshold() {
        let r = LegalRegion::new(2, 8);
        assert!(decode_spans(&scores(8, &[]), &r, DecodeMode::multi(Overlap::Flat)).is_empty());
    }

    #[test]
    fn single_cell_above_threshold() {
        let r = LegalRegion::new(2, 8);
        let s = scores(8, &[((4, 5), 0.8), ((0, 0), 0.99), ((7, 7), 0.99)]);
        let out = decode_spans(&s, &r, DecodeMode::multi(Overlap::Flat));
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].start, out[0].end), (1, 2));
    }

    #[test]
    fn flat_versus_nested() {
        let r = LegalRegion::new(1, 8);
        let s = scores(8, &[((2, 4), 0.9), ((3, 3), 0.95), ((5, 6), 0.7)]);
        let flat: Vec<_> =
            decode_spans(&s, &r, DecodeMode::multi(Overlap::Flat)).iter().map(|d| (d.start, d.end)).collect();
        assert_eq!(flat, [(1, 1), (3, 4)]);
        let nested: Vec<_> =
            decode_spans(&s, &r, DecodeMode::multi(Overlap::Nested)).iter().map(|d| (d.start, d.end)).collect();
        assert_eq!(nested, [(0, 2), (1, 1), (3, 4)]);
        let single: Vec<_> = decode_spans(&s, &r, DecodeMode::Single).iter().map(|d| (d.start, d.end)).collect();
        assert_eq!(single, [(1, 1)]);
    }

    #[test]
    fn rationale_ties_and_errors() {
        let r = LegalRegion::new(1, 6);
        let s = scores(6, &[((3, 4), 0.8), ((2, 4), 0.8), ((2, 3), 0.8)]);
        let best = extract_rationale(&s, &r).unwrap();
        assert_eq!((best.start, best.end), (0, 1));
        let single_token = LegalRegion::new(2, 5);
        let best = extract_rationale(&scores(5, &[]), &single_token).unwrap();
        assert_eq!((best.start, best.end), (0, 0));
        assert!(matches!(extract_rationale(&scores(4, &[]), &LegalRegion::new(2, 4)), Err(Error::NoLegalCells(4))));
    }
}
