//! Multi-label self-paced learning.
//!
//! Per-label linear classifiers over features augmented with a label-cluster
//! code are trained by alternating minimization, while self-paced weights
//! admit instance-label pairs from easy to hard as a pace parameter grows.

pub mod clustering;
pub mod dataio;
pub mod error;
pub mod lpsolve;
pub mod metrics;
pub mod model;
pub mod predictor;
pub mod protocol;
pub mod selfpace;
pub mod synth;
pub mod trainer;
pub mod wsvm;

pub use error::{Error, Result};
pub use model::MlsplModel;
pub use selfpace::SchemeKind;
pub use trainer::{BaselineMode, TrainConfig};
