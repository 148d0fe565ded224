//! Analytic gradients of the combined loss with respect to the hidden states
//! and the network parameters.
//!
//! With `F = FFN(H)` and logits `Z = F Hᵀ`, each scored cell contributes
//! `G[i][j] = w·(sigmoid(Z[i][j]) - y)`; then `dF = G H`, the direct term
//! `dH += Gᵀ F`, and `dF` is pushed back through the two affine layers.

use super::encoding::{LegalRegion, TargetMatrix};
use super::ffn::{FfnParams, FfnTrace};
use super::loss::{cell_weight, loss_wae, LossOptions, WaeLoss};
use super::matrix::{dot, sigmoid, Matrix};
use super::score::ScoreMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Matrix,
    pub params: FfnParams,
}

/// `dL/dZ` over the full matrix; zero outside `(0, 0)` and the legal region.
pub fn logit_gradient(
    scores: &ScoreMatrix,
    targets: &TargetMatrix,
    region: &LegalRegion,
    opts: &LossOptions,
) -> Matrix {
    let m = scores.len();
    let mut g = Matrix::zeros(m, m);
    g[(0, 0)] = sigmoid(scores.logit(0, 0)) - f64::from(u8::from(targets.y_cls));
    for (i, j) in region.cells() {
        let y = targets.is_positive(i, j);
        g[(i, j)] = cell_weight(y, region, opts) * (sigmoid(scores.logit(i, j)) - f64::from(u8::from(y)));
    }
    g
}

pub fn gradients(
    hidden: &Matrix,
    params: &FfnParams,
    targets: &TargetMatrix,
    region: &LegalRegion,
    opts: &LossOptions,
) -> Result<(WaeLoss, Gradients)> {
    if !params.shapes_consistent() || hidden.cols() != params.input_dim() {
        return Err(Error::Shape("hidden width does not match network input".into()));
    }
    if !hidden.is_finite() || !params.is_finite() {
        return Err(Error::NonFinite("gradient inputs"));
    }
    let m = hidden.rows();
    let traces: Vec<FfnTrace> = (0..m).map(|i| params.forward(hidden.row(i))).collect();
    let logits = Matrix::from_fn(m, m, |i, j| dot(&traces[i].output, hidden.row(j)));
    let scores = ScoreMatrix::from_logits(logits)?;
    let loss = loss_wae(&scores, targets, region, opts)?;
    let g = logit_gradient(&scores, targets, region, opts);

    let d = hidden.cols();
    let mut d_hidden = Matrix::zeros(m, d);
    let mut d_out = Matrix::zeros(m, d);
    let cells = std::iter::once((0, 0)).chain(region.cells());
    for (i, j) in cells {
        let gij = g[(i, j)];
        if gij == 0.0 {
            continue;
        }
        for (o, h) in d_out.row_mut(i).iter_mut().zip(hidden.row(j)) {
            *o += gij * h;
        }
        for (o, f) in d_hidden.row_mut(j).iter_mut().zip(&traces[i].output) {
            *o += gij * f;
        }
    }

    let mut d_params = FfnParams::zeros(d, params.hidden_dim(), params.activation);
    for (i, trace) in traces.iter().enumerate() {
        let df = d_out.row(i);
        d_params.w2.add_outer(1.0, df, &trace.hidden);
        for (b, v) in d_params.b2.iter_mut().zip(df) {
            *b += v;
        }
        let mut du = params.w2.tr_mul_vec(df);
        for (u, a) in du.iter_mut().zip(&trace.hidden) {
            *u *= params.activation.derivative_from_output(*a);
        }
        d_params.w1.add_outer(1.0, &du, hidden.row(i));
        for (b, v) in d_params.b1.iter_mut().zip(&du) {
            *b += v;
        }
        for (o, v) in d_hidden.row_mut(i).iter_mut().zip(params.w1.tr_mul_vec(&du)) {
            *o += v;
        }
    }
    Ok((loss, Gradients { hidden: d_hidden, params: d_params }))
}
