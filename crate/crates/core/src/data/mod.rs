//! Hierarchical record model (feature, attribute, instance, block), the
//! synthetic zigzag generator, anomaly injectors, file formats and stream
//! splitting.

mod inject;
mod io;
mod split;
mod synthetic;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use inject::{inject_anomalies, inject_mixed, AnomalyMode};
pub use io::{
    format_dataset, load_categorical_csv, parse_dataset, read_dataset, read_manifest,
    write_dataset, write_manifest, CsvSchema, DatasetManifest, LabelColumn,
};
pub use split::{blockify, label_blocks, split_random, split_sequential};
pub use synthetic::{generate_synthetic, SyntheticParams, SYNTHETIC_DIMENSION};

/// Index of a categorical feature in the dataset vocabulary.
pub type FeatureId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Normal,
    Anomalous,
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Anomalous => "anomalous",
            Label::Unknown => "unknown",
        }
    }

    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Label::Normal),
            "anomalous" => Ok(Label::Anomalous),
            "unknown" => Ok(Label::Unknown),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One record: a fixed number of attributes, each a possibly empty list of
/// feature ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub attributes: Vec<Vec<FeatureId>>,
    pub label: Label,
    pub timestamp: u64,
}

impl Instance {
    pub fn new(attributes: Vec<Vec<FeatureId>>, label: Label, timestamp: u64) -> Self {
        Instance {
            attributes,
            label,
            timestamp,
        }
    }

    pub fn max_feature(&self) -> Option<FeatureId> {
        self.attributes.iter().flatten().copied().max()
    }
}

/// A run of consecutive instances; the coarse detection unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub instances: Vec<Instance>,
    pub label: Label,
}

impl Block {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: feature id {id} is outside the declared dimension {dimension}")]
    IdOutOfRange {
        line: usize,
        id: FeatureId,
        dimension: usize,
    },
    #[error("{0}")]
    Config(String),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}
