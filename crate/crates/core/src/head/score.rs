use serde::{Deserialize, Serialize};

use super::ffn::FfnParams;
use super::matrix::{dot, sigmoid, Matrix};
use crate::error::{Error, Result};

const PROB_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

/// `M × M` span scores, stored as pre-sigmoid logits.
///
/// Cell `(i, j)` scores the span from token `i` to token `j`; cell `(0, 0)`
/// is the query-context relevance score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    logits: Matrix,
}

/// JSON export form: probabilities, row by row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreMatrixExport {
    pub len: usize,
    pub probs: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn from_logits(logits: Matrix) -> Result<Self> {
        if logits.rows() != logits.cols() {
            return Err(Error::Shape(format!("{}×{} score matrix", logits.rows(), logits.cols())));
        }
        if !logits.is_finite() {
            return Err(Error::NonFinite("score logits"));
        }
        Ok(Self { logits })
    }

    /// Builds from probabilities strictly inside `(0, 1)`.
    pub fn from_probs(probs: &Matrix) -> Result<Self> {
        if probs.as_slice().iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidInput("probabilities must lie strictly inside (0, 1)".into()));
        }
        let logits = Matrix::from_fn(probs.rows(), probs.cols(), |i, j| {
            let p = probs[(i, j)];
            (p / (1.0 - p)).ln()
        });
        Self::from_logits(logits)
    }

    pub fn len(&self) -> usize {
        self.logits.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.rows() == 0
    }

    pub fn logit(&self, i: usize, j: usize) -> f64 {
        self.logits[(i, j)]
    }

    pub fn logits(&self) -> &Matrix {
        &self.logits
    }

    /// Probability, kept strictly inside `(0, 1)` even for saturated logits.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        sigmoid(self.logits[(i, j)]).clamp(f64::MIN_POSITIVE, PROB_CEIL)
    }

    pub fn relevance(&self) -> f64 {
        self.prob(0, 0)
    }

    pub fn set_logit(&mut self, i: usize, j: usize, z: f64) {
        self.logits[(i, j)] = z;
    }

    pub fn probs(&self) -> Matrix {
        Matrix::from_fn(self.len(), self.len(), |i, j| self.prob(i, j))
    }

    pub fn export(&self) -> ScoreMatrixExport {
        ScoreMatrixExport { len: self.len(), probs: self.probs().to_rows() }
    }
}

/// `S[i][j] = sigmoid(<FFN(h_i), h_j>)` over every cell, unmasked.
pub fn score_matrix(hidden: &Matrix, params: &FfnParams) -> Result<ScoreMatrix> {
    if !params.shapes_consistent() || hidden.cols() != params.input_dim() {
        return Err(Error::Shape(format!("hidden width {} vs network input {}", hidden.cols(), params.input_dim())));
    }
    if !hidden.is_finite() {
        return Err(Error::NonFinite("hidden states"));
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("network parameters"));
    }
    let m = hidden.rows();
    let projected: Vec<Vec<f64>> = (0..m).map(|i| params.apply(hidden.row(i))).collect();
    let logits = Matrix::from_fn(m, m, |i, j| dot(&projected[i], hidden.row(j)));
    ScoreMatrix::from_logits(logits)
}
