//! Recurrent sequence predictors augmented with differentiable, unbounded
//! structured memory (stack and doubly-linked list), the algorithmic-pattern
//! task suite, the SGD/truncated-backprop training recipe, and the per-length
//! generalization evaluation protocol.

use thiserror::Error as ThisError;

pub mod eval;
pub mod memory;
pub mod model;
pub mod numerics;
pub mod tasks;
pub mod training;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("non-finite loss (divergence)")]
    NonFiniteLoss,
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("all {0} restarts diverged")]
    AllRunsDiverged(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
