//! Relevance and extraction losses.
//!
//! Both are per-cell binary cross-entropy evaluated from logits,
//! `BCE(z, y) = softplus(z) - y·z`. The relevance loss uses cell `(0, 0)`
//! only; the extraction loss sums over the legal region and ignores every
//! other cell.

use serde::{Deserialize, Serialize};

use super::encoding::{LegalRegion, TargetMatrix};
use super::matrix::softplus;
use super::score::ScoreMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossOptions {
    /// Multiplier on negative extraction cells.
    pub negative_weight: f64,
    /// How extraction cells are combined.
    pub reduction: Reduction,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self { negative_weight: 1.0, reduction: Reduction::Sum }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaeLoss {
    pub cls: f64,
    pub ext: f64,
    pub total: f64,
}

/// Cross-entropy of one logit against a binary label.
pub fn bce_with_logit(z: f64, y: bool) -> f64 {
    if y {
        softplus(-z)
    } else {
        softplus(z)
    }
}

pub fn loss_cls(scores: &ScoreMatrix, y_cls: bool) -> f64 {
    bce_with_logit(scores.logit(0, 0), y_cls)
}

fn check_region(scores: &ScoreMatrix, targets: &TargetMatrix, region: &LegalRegion) -> Result<()> {
    if region.len != scores.len() {
        return Err(Error::Shape(format!("region over {} tokens, scores over {}", region.len, scores.len())));
    }
    targets.validate(region)
}

/// Weight applied to each extraction cell of the given label.
pub(crate) fn cell_weight(y: bool, region: &LegalRegion, opts: &LossOptions) -> f64 {
    let w = if y { 1.0 } else { opts.negative_weight };
    match opts.reduction {
        Reduction::Sum => w,
        Reduction::Mean => w / region.cell_count().max(1) as f64,
    }
}

pub fn loss_ext(scores: &ScoreMatrix, targets: &TargetMatrix, region: &LegalRegion, opts: &LossOptions) -> Result<f64> {
    check_region(scores, targets, region)?;
    let mut total = 0.0;
    for (i, j) in region.cells() {
        let y = targets.is_positive(i, j);
        total += cell_weight(y, region, opts) * bce_with_logit(scores.logit(i, j), y);
    }
    Ok(total)
}

pub fn loss_wae(
    scores: &ScoreMatrix,
    targets: &TargetMatrix,
    region: &LegalRegion,
    opts: &LossOptions,
) -> Result<WaeLoss> {
    let ext = loss_ext(scores, targets, region, opts)?;
    let cls = loss_cls(scores, targets.y_cls);
    Ok(WaeLoss { cls, ext, total: cls + ext })
}
