use serde::{Deserialize, Serialize};
use tactislip_core::WINDOW_FEATURES;

use crate::{NnError, Result};

/// Layer sizes. The encoder maps one flattened window to `encoder_out`
/// through a batch-normalized hidden layer; the estimator maps the GRU
/// state to class logits through batch-normalized hidden layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub encoder_hidden: usize,
    pub encoder_out: usize,
    pub gru_hidden: usize,
    pub estimator_hidden: Vec<usize>,
    pub classes: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl NetworkConfig {
    /// 720 → 1024 → 128, GRU 128, 256 → 128 → 2.
    pub fn full() -> Self {
        Self {
            input_dim: WINDOW_FEATURES,
            encoder_hidden: 1024,
            encoder_out: 128,
            gru_hidden: 128,
            estimator_hidden: vec![256, 128],
            classes: 2,
        }
    }

    /// Widths 4-8-4 throughout: 4 inputs, 8 hidden, 4 recurrent.
    pub fn toy() -> Self {
        Self { input_dim: 4, encoder_hidden: 8, encoder_out: 4, gru_hidden: 4, estimator_hidden: vec![8, 4], classes: 2 }
    }

    /// Widths 64-32: 64 inputs and hidden units, 32 recurrent.
    pub fn mid() -> Self {
        Self { input_dim: 64, encoder_hidden: 64, encoder_out: 32, gru_hidden: 32, estimator_hidden: vec![64, 32], classes: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.input_dim, self.encoder_hidden, self.encoder_out, self.gru_hidden];
        if dims.contains(&0) || self.estimator_hidden.contains(&0) {
            return Err(NnError::InvalidConfig("layer sizes must be positive".into()));
        }
        if self.classes != 2 {
            return Err(NnError::InvalidConfig(format!("output layer must have 2 units, got {}", self.classes)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    /// L2 coefficient λ; the penalty is λ‖w‖² on weight matrices.
    pub weight_decay: f64,
    /// Minimum windows per batch; batches are whole sequences.
    pub batch_windows: usize,
    pub epochs: usize,
    pub bn_momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-3, momentum: 0.95, weight_decay: 1e-3, batch_windows: 512, epochs: 200, bn_momentum: 0.1, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(NnError::InvalidConfig(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(NnError::InvalidConfig("momentum values must lie in [0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(NnError::InvalidConfig("weight decay must be non-negative".into()));
        }
        if self.batch_windows == 0 {
            return Err(NnError::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}
