//! Adversarial anomaly detection for streams of categorical records, at
//! the instance and block level.
//!
//! The pipeline is: [`data`] produces time-ordered instances, [`model`]
//! pushes each block through the representation and generator chains,
//! [`training`] alternates generator and discriminator updates block by
//! block, and [`scoring`] turns losses into anomaly scores and metrics.

pub mod adversarial;
pub mod config;
pub mod data;
mod error;
pub mod model;
pub mod representation;
pub mod scoring;
pub mod tensor;
pub mod training;

pub use config::{DiscTerms, NormStats, RnnCell, TrainConfig};
pub use data::{Block, Instance, Label};
pub use error::{CheckpointError, Error, EvalError, ModelError};
pub use model::{Model, ModelDims};
pub use tensor::{RngState, Tensor};
