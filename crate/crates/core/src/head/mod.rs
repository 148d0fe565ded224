//! Span-scoring head: input layout, toy encoder, score matrix, losses,
//! analytic gradients, decoding and a small training loop.

mod decode;
mod encoding;
mod ffn;
mod grad;
mod loss;
pub mod matrix;
mod score;
pub mod toy;
pub mod train;

pub use decode::{
    decode_spans, extract_rationale, rank_order, select_non_overlapping, DecodeMode, DecodedSpan, Overlap,
};
pub use encoding::{encode_input, InputEncoding, LegalRegion, TargetMatrix, CLS, SEP};
pub use ffn::{Activation, FfnParams, FfnTrace};
pub use grad::{gradients, logit_gradient, Gradients};
pub use loss::{bce_with_logit, loss_cls, loss_ext, loss_wae, LossOptions, Reduction, WaeLoss};
pub use matrix::{sigmoid, Matrix};
pub use score::{score_matrix, ScoreMatrix, ScoreMatrixExport};
pub use toy::toy_encode;
pub use train::{demo_train, synthetic_corpus, StepLog, TrainConfig, TrainReport};
