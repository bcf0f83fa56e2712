use thiserror::Error;

use crate::config::ConfigError;
use crate::data::DataError;
use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("feature id {id} outside vocabulary of size {dimension}")]
    UnknownFeature { id: usize, dimension: usize },
    #[error("instance {instance} has {found} attributes, model expects {expected}")]
    AttributeCount {
        instance: usize,
        expected: usize,
        found: usize,
    },
    #[error("block has no instances")]
    EmptyBlock,
    #[error("{0}")]
    Shape(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a checkpoint file (missing or wrong header)")]
    Header,
    #[error("checkpoint format version {found}, this build reads {expected}")]
    Version { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint does not match: {0}")]
    Mismatch(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("need both normal and anomalous labels, got {positives} anomalous and {negatives} normal")]
    SingleClass { positives: usize, negatives: usize },
    #[error("score is not finite at position {0}")]
    NonFinite(usize),
    #[error("score file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Any failure of the pipeline, grouped the way the command line reports it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
