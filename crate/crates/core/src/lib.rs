//! Wiki anchor extraction toolkit.
//!
//! Turns hyperlinked encyclopedia articles into (query, context, answers)
//! reading-comprehension examples, and carries a reference implementation of
//! the span-scoring head that is trained on them: input layout, score matrix,
//! losses with analytic gradients, and span decoding. Downstream NER, extractive
//! QA and classification tasks are converted to the same format by
//! [`tasks`], and scored by [`eval`].

pub mod corpus;
pub mod error;
pub mod eval;
pub mod example;
pub mod head;
pub mod ingest;
pub mod selftest;
pub mod tasks;
pub mod text;

pub use error::{Error, Result};
