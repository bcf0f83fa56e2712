//! Dense tensors, reverse-mode differentiation, seeded randomness and the
//! RMSProp optimizer.

mod array;
mod optim;
mod rng;
mod tape;


pub use array::Tensor;
pub use optim::RmsProp;
pub use rng::{RngSnapshot, RngState};
pub use tape::{Activation, Gradients, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} values")]
    ElementCount { shape: Vec<usize>, len: usize },
    #[error("zero-sized dimension in shape {0:?}")]
    EmptyDimension(Vec<usize>),
    #[error("expected a matrix, got shape {0:?}")]
    Rank(Vec<usize>),
    #[error("rows have different lengths")]
    RaggedRows,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("index {index} out of range for {bound} rows")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("segment {start}..{end} outside {rows} rows")]
    SegmentBounds { start: usize, end: usize, rows: usize },
}
