//! Window classifier: encoder, single-layer GRU and estimator, trained by
//! backpropagation through time with SGD momentum, plus the bagged
//! ensemble that averages member probabilities.
//!
//! All arithmetic is `f64`. Matrices hold one window per row.

pub mod config;
pub mod ensemble;
pub mod gradcheck;
pub mod network;
pub mod ops;
pub mod optim;
pub mod params;
pub mod serialize;
pub mod train;

pub use config::{NetworkConfig, TrainConfig};
pub use ensemble::{aggregate_decide, train_ensemble, train_member, Bagging, EnsembleConfig, EnsembleModel, EnsembleState};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use network::{ForwardTrace, Network};
pub use train::TrainSequence;

/// Errors raised by the network, training and model I/O.
#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite input in window {window}")]
    NonFiniteInput { window: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
