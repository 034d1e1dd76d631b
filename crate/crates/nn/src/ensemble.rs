//! Bagged ensemble: independent members trained on with-replacement
//! resamples, combined by thresholding the mean incipient probability.

use std::path::Path;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tactislip_core::seed::{derive_seed, rng_from_seed};
use tactislip_core::WindowLabel;

use crate::config::{NetworkConfig, TrainConfig};
use crate::network::Network;
use crate::serialize::{parse_versioned, ModelEnvelope, TrainingProvenance, MODEL_FORMAT_VERSION};
use crate::train::{data_hash, evaluate_loss, EpochStats, Trainer, TrainSequence};
use crate::{NnError, Result};

/// When the bag is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bagging {
    /// One bag of `⌈λn⌉` sequences per epoch.
    #[default]
    PerEpoch,
    /// Every gradient step draws its own batch with replacement; an epoch
    /// has as many steps as a per-epoch bag would.
    PerStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub members: usize,
    pub lambda: f64,
    pub threshold: f64,
    pub bagging: Bagging,
    pub network: NetworkConfig,
    /// `train.seed` is the master seed; member `z` uses a seed derived
    /// from it.
    pub train: TrainConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            members: 5,
            lambda: 0.4,
            threshold: 0.5,
            bagging: Bagging::PerEpoch,
            network: NetworkConfig::full(),
            train: TrainConfig::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members == 0 {
            return Err(NnError::InvalidConfig("an ensemble needs at least one member".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(NnError::InvalidConfig(format!("bagging fraction must lie in (0, 1], got {}", self.lambda)));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(NnError::InvalidConfig(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        self.network.validate()?;
        self.train.validate()
    }
}

/// `⌈λn⌉`, tolerant of rounding in `λn` (0.4 · 1140 is 456, not 457).
pub fn bag_size(lambda: f64, n: usize) -> usize {
    ((lambda * n as f64) - 1e-9).ceil().max(1.0) as usize
}

pub fn draw_bag<R: Rng>(n: usize, lambda: f64, rng: &mut R) -> Vec<usize> {
    (0..bag_size(lambda, n)).map(|_| rng.random_range(0..n)).collect()
}

#[derive(Debug, Clone)]
pub struct TrainedMember {
    pub network: Network,
    pub provenance: TrainingProvenance,
    pub history: Vec<EpochStats>,
}

/// Trains one network on bags drawn from `data`. With a validation set,
/// the parameters of the epoch with the lowest validation loss are kept.
pub fn train_member(
    data: &[TrainSequence],
    network: &NetworkConfig,
    train: &TrainConfig,
    lambda: f64,
    bagging: Bagging,
    validation: Option<&[TrainSequence]>,
) -> Result<TrainedMember> {
    if data.iter().all(TrainSequence::is_empty) {
        return Err(NnError::InvalidInput("training set has no windows".into()));
    }
    let mut init_rng = rng_from_seed(derive_seed(train.seed, 0));
    let mut rng = rng_from_seed(derive_seed(train.seed, 1));
    let mut trainer = Trainer::new(Network::new(network.clone(), &mut init_rng)?, train.clone())?;
    let total_windows: usize = data.iter().map(TrainSequence::len).sum();
    let mut history = Vec::with_capacity(train.epochs);
    let mut best: Option<(f64, Network)> = None;
    for epoch in 0..train.epochs {
        let mut stats = match bagging {
            Bagging::PerEpoch => {
                let bag = draw_bag(data.len(), lambda, &mut rng);
                trainer.train_epoch(data, &bag, epoch, &mut rng)?
            }
            Bagging::PerStep => {
                let steps = (lambda * total_windows as f64 / train.batch_windows as f64).ceil().max(1.0) as usize;
                let batches: Vec<Vec<usize>> = (0..steps).map(|_| draw_step_batch(data, train.batch_windows, &mut rng)).collect();
                trainer.run_batches(data, &batches, epoch)?
            }
        };
        if let Some(val) = validation {
            let loss = evaluate_loss(&trainer.network, val)?;
            stats.validation_loss = Some(loss);
            if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                best = Some((loss, trainer.network.clone()));
            }
        }
        log::info!(
            "seed {:#x} epoch {}/{}: loss {:.5}{}",
            train.seed,
            epoch + 1,
            train.epochs,
            stats.loss,
            stats.validation_loss.map_or(String::new(), |v| format!(", validation {v:.5}"))
        );
        history.push(stats);
    }
    let network = best.map_or(trainer.network, |(_, n)| n);
    let provenance = TrainingProvenance { seed: train.seed, epochs: train.epochs, data_hash: data_hash(data) };
    Ok(TrainedMember { network, provenance, history })
}

fn draw_step_batch<R: Rng>(data: &[TrainSequence], batch_windows: usize, rng: &mut R) -> Vec<usize> {
    let mut batch = Vec::new();
    let mut count = 0;
    while count < batch_windows {
        let i = rng.random_range(0..data.len());
        if !data[i].is_empty() {
            batch.push(i);
            count += data[i].len();
        }
    }
    batch
}

/// Trains `config.members` networks, in parallel, from seeds derived from
/// `config.train.seed`.
pub fn train_ensemble(data: &[TrainSequence], validation: Option<&[TrainSequence]>, config: &EnsembleConfig) -> Result<EnsembleModel> {
    config.validate()?;
    let trained: Vec<TrainedMember> = (0..config.members)
        .into_par_iter()
        .map(|z| {
            let train = TrainConfig { seed: derive_seed(config.train.seed, z as u64), ..config.train.clone() };
            train_member(data, &config.network, &train, config.lambda, config.bagging, validation)
        })
        .collect::<Result<_>>()?;
    let (members, provenance) = trained.into_iter().map(|m| (m.network, Some(m.provenance))).unzip();
    EnsembleModel::new(members, provenance, config.threshold, config.lambda, config.train.seed)
}

/// Exact sum of floats: Shewchuk's non-overlapping partials, rounded once
/// at the end.
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &v in values {
        let mut x = v;
        let mut kept = 0;
        for k in 0..partials.len() {
            let mut y = partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // sum the partials from the top, then correct for round-half-even
    let Some(mut hi) = partials.pop() else { return 0.0 };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

/// Incipient iff the mean member probability is strictly above
/// `threshold`; ties go to other.
pub fn aggregate_decide(member_probs: &[f64], threshold: f64) -> Result<WindowLabel> {
    Ok(decide(mean_probability(member_probs)?, threshold))
}

pub fn mean_probability(member_probs: &[f64]) -> Result<f64> {
    if member_probs.is_empty() {
        return Err(NnError::InvalidInput("no member probabilities".into()));
    }
    if let Some(p) = member_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(NnError::InvalidInput(format!("probability {p} outside [0, 1]")));
    }
    Ok(exact_sum(member_probs) / member_probs.len() as f64)
}

fn decide(mean: f64, threshold: f64) -> WindowLabel {
    if mean > threshold {
        WindowLabel::Incipient
    } else {
        WindowLabel::Other
    }
}

/// Per-member recurrent states.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub hidden: Vec<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowDecision {
    pub member_probs: Vec<f64>,
    pub mean: f64,
    pub decision: WindowLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub members: Vec<Network>,
    pub provenance: Vec<Option<TrainingProvenance>>,
    pub threshold: f64,
    pub lambda: f64,
    pub master_seed: u64,
}

impl EnsembleModel {
    pub fn new(
        members: Vec<Network>,
        provenance: Vec<Option<TrainingProvenance>>,
        threshold: f64,
        lambda: f64,
        master_seed: u64,
    ) -> Result<Self> {
        let first = members.first().ok_or_else(|| NnError::InvalidConfig("an ensemble needs at least one member".into()))?;
        if members.iter().any(|m| m.config != first.config) {
            return Err(NnError::InvalidConfig("members must share one network configuration".into()));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(NnError::InvalidConfig(format!("threshold must lie in (0, 1), got {threshold}")));
        }
        if provenance.len() != members.len() {
            return Err(NnError::InvalidConfig("one provenance entry per member".into()));
        }
        Ok(Self { members, provenance, threshold, lambda, master_seed })
    }

    /// Wraps a single network.
    pub fn single(network: Network, threshold: f64) -> Result<Self> {
        Self::new(vec![network], vec![None], threshold, 1.0, 0)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.members[0].config
    }

    pub fn initial_state(&self) -> EnsembleState {
        EnsembleState { hidden: self.members.iter().map(Network::initial_state).collect() }
    }

    /// Advances every member by one window.
    pub fn step(&self, state: &mut EnsembleState, window: ArrayView1<f64>) -> Result<WindowDecision> {
        let incipient = WindowLabel::Incipient.class_index();
        let member_probs = self
            .members
            .iter()
            .zip(&mut state.hidden)
            .map(|(m, h)| m.step_eval(window, h).map(|p| p[incipient]))
            .collect::<Result<Vec<_>>>()?;
        let mean = mean_probability(&member_probs)?;
        Ok(WindowDecision { member_probs, mean, decision: decide(mean, self.threshold) })
    }

    /// Decisions for every window of one sequence, from fresh states.
    pub fn forward(&self, windows: ArrayView2<f64>) -> Result<Vec<WindowDecision>> {
        let mut state = self.initial_state();
        windows.rows().into_iter().map(|w| self.step(&mut state, w)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = EnsembleFile {
            format_version: MODEL_FORMAT_VERSION,
            z: self.members.len(),
            threshold: self.threshold,
            lambda: self.lambda,
            master_seed: self.master_seed,
            members: self.members.iter().zip(&self.provenance).map(|(m, p)| ModelEnvelope::from_network(m, p.clone())).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EnsembleFile = parse_versioned(text)?;
        if file.z != file.members.len() {
            return Err(NnError::Format(format!("z = {} but {} members stored", file.z, file.members.len())));
        }
        let (members, provenance) = file.members.into_iter().map(ModelEnvelope::into_network).collect::<Result<Vec<_>>>()?.into_iter().unzip();
        Self::new(members, provenance, file.threshold, file.lambda, file.master_seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EnsembleFile {
    format_version: u32,
    z: usize,
    threshold: f64,
    lambda: f64,
    master_seed: u64,
    members: Vec<ModelEnvelope>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bag_sizes() {
        assert_eq!(bag_size(0.4, 1140), 456);
        assert_eq!(bag_size(0.4, 915), 366);
        assert_eq!(bag_size(1.0, 1), 1);
        assert_eq!(bag_size(0.01, 3), 1);
    }

    #[test]
    fn exact_sum_cancels() {
        assert_eq!(exact_sum(&[1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum(&[0.1; 10]), 1.0);
        assert_eq!(exact_sum(&[]), 0.0);
        let vals = [0.35, 0.65, 0.5];
        assert_eq!(exact_sum(&vals), 1.5);
    }

    #[test]
    fn decision_examples() {
        assert_eq!(aggregate_decide(&[0.6, 0.6, 0.6, 0.4, 0.4], 0.5).unwrap(), WindowLabel::Incipient);
        assert_eq!(aggregate_decide(&[0.5; 5], 0.5).unwrap(), WindowLabel::Other);
        assert_eq!(aggregate_decide(&[1.0, 1.0, 0.0, 0.0, 0.0], 0.5).unwrap(), WindowLabel::Other);
        assert!(aggregate_decide(&[1.2], 0.5).is_err());
        assert!(aggregate_decide(&[f64::NAN], 0.5).is_err());
        assert!(aggregate_decide(&[], 0.5).is_err());
    }
}
