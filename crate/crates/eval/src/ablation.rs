//! Training with and without the domain-adaptation remedies, scored on a
//! domain-shifted test set.

use serde::{Deserialize, Serialize};
use tactislip_core::{AugmentationConfig, LabeledSequence};
use tactislip_nn::{EnsembleConfig, EnsembleModel};

use crate::metrics::{ConfusionDelta, ConfusionMatrix};
use crate::pipeline::evaluate_model;
use crate::recipe::{augment_tagged, train_model};
use crate::{EvalError, Result};

/// Five shifted copies of each held-out sequence: every copy has unloaded
/// pillars, a resampled drive speed and scaled forces, plus a random
/// rotation.
pub fn shifted_test_config(seed: u64) -> AugmentationConfig {
    AugmentationConfig {
        permute: false,
        mix: false,
        remedy_probability: 1.0,
        rng_seed: seed,
        ..AugmentationConfig::default()
    }
}

pub fn shifted_test_set(test_raw: &[LabeledSequence], seed: u64) -> Result<Vec<LabeledSequence>> {
    augment_tagged(test_raw, &shifted_test_config(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub augmented: ConfusionMatrix,
    pub plain: ConfusionMatrix,
    /// `plain − augmented`, cell by cell.
    pub delta: ConfusionDelta,
}

impl AblationResult {
    /// Whether the plain arm misclassified strictly more units.
    pub fn remedies_help(&self) -> bool {
        self.plain.misclassifications() > self.augmented.misclassifications()
    }
}

/// Scores two trained ensembles on the same shifted set.
pub fn ablation_compare(augmented: &EnsembleModel, plain: &EnsembleModel, shifted_test: &[LabeledSequence]) -> Result<AblationResult> {
    if shifted_test.is_empty() {
        return Err(EvalError::InvalidInput("shifted test set is empty".into()));
    }
    let a = ConfusionMatrix::from_outcomes(&evaluate_model(augmented, shifted_test)?)?;
    let p = ConfusionMatrix::from_outcomes(&evaluate_model(plain, shifted_test)?)?;
    Ok(AblationResult { augmented: a, plain: p, delta: p.delta(&a) })
}

/// Trains one ensemble per training set, with identical settings, and
/// compares them.
pub fn ablation_run(
    augmented_train: &[LabeledSequence],
    plain_train: &[LabeledSequence],
    shifted_test: &[LabeledSequence],
    ensemble: &EnsembleConfig,
) -> Result<AblationResult> {
    if shifted_test.is_empty() {
        return Err(EvalError::InvalidInput("shifted test set is empty".into()));
    }
    let augmented = train_model(augmented_train, ensemble)?;
    let plain = train_model(plain_train, ensemble)?;
    ablation_compare(&augmented, &plain, shifted_test)
}
