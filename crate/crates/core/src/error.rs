use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed record {record}: {reason}")]
    MalformedRecord { record: usize, reason: String },

    #[error("empty definition article: {0}")]
    EmptyDefinition(String),

    #[error("alignment failure: {0}")]
    Alignment(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not enough entities for dev split: requested {requested}, have {available}")]
    NotEnoughEntities { requested: usize, available: usize },

    #[error("target ({0}, {1}) lies outside the legal span region")]
    IllegalTarget(usize, usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no legal span candidates (sequence length {0})")]
    NoLegalCells(usize),

    #[error("id mismatch: {0}")]
    IdMismatch(String),
}
