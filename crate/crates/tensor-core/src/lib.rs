//! Minimal dense-tensor library with reverse-mode differentiation over the
//! op set the networks in this workspace need, plus RMSProp, weight init,
//! finite-difference gradient checking, and a binary checkpoint container.
//!
//! Everything is 64-bit; graphs are rebuilt per forward pass and confined
//! to one thread at a time.

use thiserror::Error;

pub mod archive;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod optim;
pub mod params;
pub mod suite;
mod tensor;

pub use archive::{Archive, ArchiveError, Entry, EntryData};
pub use gradcheck::{grad_check, GradCheckReport, LeafReport};
pub use graph::{Gradients, Graph};
pub use optim::RmsProp;
pub use params::{ParamSet, ParamSnapshot};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: String, detail: String },
    #[error("{op}: invalid attribute: {detail}")]
    InvalidAttr { op: String, detail: String },
    #[error("data length {got} does not match shape ({expected} elements)")]
    DataLength { expected: usize, got: usize },
    #[error("non-finite value {value} at index {index} in {context}")]
    NonFinite {
        context: String,
        index: usize,
        value: f64,
    },
    #[error("expected a scalar, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("no optimizer accumulator registered for tensor {id}")]
    MissingAccumulator { id: u64 },
}

impl TensorError {
    pub(crate) fn shape(op: &str, detail: impl Into<String>) -> Self {
        TensorError::ShapeMismatch {
            op: op.to_string(),
            detail: detail.into(),
        }
    }

    pub(crate) fn attr(op: &str, detail: impl Into<String>) -> Self {
        TensorError::InvalidAttr {
            op: op.to_string(),
            detail: detail.into(),
        }
    }
}
