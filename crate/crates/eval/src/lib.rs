//! Offline evaluation: per-sequence verdicts, confusion counts, detection
//! latency, normalized displacement, the end-to-end recipe and the
//! augmentation ablation.

pub mod ablation;
pub mod judge;
pub mod metrics;
pub mod pipeline;
pub mod recipe;

pub use ablation::{ablation_compare, ablation_run, shifted_test_set, AblationResult};
pub use judge::{judge_sequence, SequenceOutcome, Verdict};
pub use metrics::{detection_latency, normalized_displacement, ConfusionMatrix, Displacement, LatencySummary};
pub use pipeline::{evaluate_model, predict, predict_all, stratified_split, SequencePrediction, Split};
pub use recipe::{build_data, evaluate_sets, run_recipe, write_artifacts, EvalReport, RecipeConfig, RecipeData, SetReport};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Core(#[from] tactislip_core::CoreError),
    #[error(transparent)]
    Nn(#[from] tactislip_nn::NnError),
    #[error(transparent)]
    Sim(#[from] tactislip_sim::SimError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;
