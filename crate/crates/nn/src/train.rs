//! Training data, batching and the SGD loop.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use sha2::{Digest, Sha256};
use tactislip_core::{PreparedSequence, WindowLabel};

use crate::config::TrainConfig;
use crate::network::{BackwardOptions, Network};
use crate::ops::bce_loss;
use crate::optim::SgdMomentum;
use crate::{NnError, Result};

/// One sequence's windows (one per row) and class targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSequence {
    pub windows: Array2<f64>,
    pub labels: Vec<usize>,
}

impl TrainSequence {
    pub fn new(windows: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if windows.nrows() != labels.len() {
            return Err(NnError::InvalidInput(format!("{} windows but {} labels", windows.nrows(), labels.len())));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(NnError::InvalidInput("labels must be 0 or 1".into()));
        }
        Ok(Self { windows, labels })
    }

    pub fn from_prepared(prepared: &PreparedSequence) -> Self {
        let cols = prepared.windows.first().map_or(tactislip_core::WINDOW_FEATURES, |w| w.features.len());
        let flat: Vec<f64> = prepared.windows.iter().flat_map(|w| w.features.iter().copied()).collect();
        let windows = Array2::from_shape_vec((prepared.windows.len(), cols), flat).expect("windows share one width");
        let labels = prepared.windows.iter().map(|w| w.label.class_index()).collect();
        Self { windows, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn incipient_count(&self) -> usize {
        let target = WindowLabel::Incipient.class_index();
        self.labels.iter().filter(|&&l| l == target).count()
    }
}

/// SHA-256 over window bytes and labels, hex encoded.
pub fn data_hash(data: &[TrainSequence]) -> String {
    let mut hasher = Sha256::new();
    for seq in data {
        hasher.update((seq.windows.nrows() as u64).to_le_bytes());
        hasher.update((seq.windows.ncols() as u64).to_le_bytes());
        for v in seq.windows.iter() {
            hasher.update(v.to_le_bytes());
        }
        for &l in &seq.labels {
            hasher.update([l as u8]);
        }
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Groups sequences, in the given order, into batches of at least
/// `batch_windows` windows. A short remainder joins the last full batch.
/// Empty sequences are skipped.
pub fn plan_batches(order: &[usize], data: &[TrainSequence], batch_windows: usize) -> Vec<Vec<usize>> {
    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut count = 0;
    for &i in order {
        if data[i].is_empty() {
            continue;
        }
        current.push(i);
        count += data[i].len();
        if count >= batch_windows {
            batches.push(std::mem::take(&mut current));
            count = 0;
        }
    }
    if !current.is_empty() {
        match batches.last_mut() {
            Some(last) => last.extend(current),
            None => batches.push(current),
        }
    }
    batches
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Window-weighted mean training objective.
    pub loss: f64,
    pub windows: usize,
    pub steps: usize,
    pub validation_loss: Option<f64>,
}

/// Network plus optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub network: Network,
    pub optimizer: SgdMomentum,
    pub config: TrainConfig,
}

impl Trainer {
    pub fn new(network: Network, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = SgdMomentum::new(&network.params, config.lr, config.momentum);
        Ok(Self { network, optimizer, config })
    }

    /// One gradient step on the listed sequences. Returns the objective.
    pub fn train_batch(&mut self, data: &[TrainSequence], batch: &[usize]) -> Result<f64> {
        let views: Vec<ArrayView2<f64>> = batch.iter().map(|&i| data[i].windows.view()).collect();
        let labels: Vec<&[usize]> = batch.iter().map(|&i| data[i].labels.as_slice()).collect();
        let (loss, grads, trace) =
            self.network.loss_and_grads(&views, &labels, self.config.weight_decay, BackwardOptions::default())?;
        if !loss.is_finite() {
            return Err(NnError::Numeric(format!("non-finite loss {loss}")));
        }
        for (spec, g) in self.network.layout.specs.iter().zip(&grads) {
            if let Some(v) = g.iter().find(|v| !v.is_finite()) {
                return Err(NnError::Numeric(format!("non-finite gradient {v} in {}", spec.name)));
            }
        }
        self.optimizer.step(&mut self.network.params, &grads);
        self.network.bn.update(&trace.bn_batch_stats(), trace.rows(), self.config.bn_momentum);
        if !self.network.all_finite() {
            return Err(NnError::Numeric("parameters became non-finite after an update".into()));
        }
        Ok(loss)
    }

    /// Shuffles `sample` (indices into `data`, repeats allowed), batches
    /// it and takes one step per batch.
    pub fn train_epoch<R: Rng>(&mut self, data: &[TrainSequence], sample: &[usize], epoch: usize, rng: &mut R) -> Result<EpochStats> {
        let mut order = sample.to_vec();
        order.shuffle(rng);
        let batches = plan_batches(&order, data, self.config.batch_windows);
        self.run_batches(data, &batches, epoch)
    }

    pub fn run_batches(&mut self, data: &[TrainSequence], batches: &[Vec<usize>], epoch: usize) -> Result<EpochStats> {
        let (mut total, mut windows) = (0.0, 0);
        for batch in batches {
            let n: usize = batch.iter().map(|&i| data[i].len()).sum();
            total += self.train_batch(data, batch)? * n as f64;
            windows += n;
        }
        Ok(EpochStats { epoch, loss: total / windows.max(1) as f64, windows, steps: batches.len(), validation_loss: None })
    }
}

/// Mean evaluation-mode cross-entropy over all windows.
pub fn evaluate_loss(network: &Network, data: &[TrainSequence]) -> Result<f64> {
    let (mut total, mut n) = (0.0, 0);
    for seq in data.iter().filter(|s| !s.is_empty()) {
        let probs = network.forward_eval(seq.windows.view())?;
        let probs = Array2::from_shape_vec((probs.len(), 2), probs.into_iter().flatten().collect()).expect("pairs");
        total += bce_loss(&probs, &seq.labels).0 * seq.len() as f64;
        n += seq.len();
    }
    Ok(total / n.max(1) as f64)
}

/// Fraction of windows whose argmax class equals the label.
pub fn accuracy(network: &Network, data: &[TrainSequence]) -> Result<f64> {
    let (mut hits, mut n) = (0, 0);
    for seq in data {
        for (p, &y) in network.forward_eval(seq.windows.view())?.iter().zip(&seq.labels) {
            let predicted = usize::from(p[1] > p[0]);
            hits += usize::from(predicted == y);
            n += 1;
        }
    }
    Ok(hits as f64 / n.max(1) as f64)
}
