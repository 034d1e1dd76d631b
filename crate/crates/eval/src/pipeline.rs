//! Splitting, preparation and offline inference over labeled sequences.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tactislip_core::seed::rng_from_seed;
use tactislip_core::{prepare, prepare_unlabeled, LabeledSequence, PreparedSequence, SequenceClass, DEFAULT_MEDIAN_WINDOW};
use tactislip_nn::ensemble::WindowDecision;
use tactislip_nn::{EnsembleModel, TrainSequence};

use crate::judge::{judge_sequence, SequenceOutcome};
use crate::{EvalError, Result};

/// Corpus indices on each side of a split, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits each class separately. A class of `n` sequences sends
/// `⌊(1 − ratio)·n⌋` to the test side, so 200 slip + 28 stop at 0.8 gives
/// 160 + 23 for training and 40 + 5 for testing.
pub fn stratified_split(classes: &[SequenceClass], train_ratio: f64, seed: u64) -> Result<Split> {
    if !(train_ratio > 0.0 && train_ratio <= 1.0) {
        return Err(EvalError::InvalidInput(format!("train ratio must lie in (0, 1], got {train_ratio}")));
    }
    let mut rng = rng_from_seed(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in [SequenceClass::Slip, SequenceClass::Stop] {
        let mut members: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] == class).collect();
        members.shuffle(&mut rng);
        let n_test = ((1.0 - train_ratio) * members.len() as f64 + 1e-9).floor() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

pub fn select(corpus: &[LabeledSequence], indices: &[usize]) -> Vec<LabeledSequence> {
    indices.iter().map(|&i| corpus[i].clone()).collect()
}

/// The sequence's id, or its position when it has none.
pub fn sequence_id(item: &LabeledSequence, index: usize) -> String {
    item.sequence.meta.id.clone().unwrap_or_else(|| format!("seq-{index:04}"))
}

/// Gives the copies of an expanded dataset distinct ids: copy `c` of
/// source `base` becomes `base/aug{c}`.
pub fn tag_copies(items: &mut [LabeledSequence], factor: usize) {
    for (k, item) in items.iter_mut().enumerate() {
        let base = item.sequence.meta.id.clone().unwrap_or_else(|| format!("seq-{:04}", k / factor.max(1)));
        item.sequence.meta.id = Some(format!("{base}/aug{}", k % factor.max(1)));
    }
}

fn window_matrix(prepared: &PreparedSequence, width: usize) -> Array2<f64> {
    let flat: Vec<f64> = prepared.windows.iter().flat_map(|w| w.features.iter().copied()).collect();
    Array2::from_shape_vec((prepared.windows.len(), width), flat).expect("windows share one width")
}

/// Filters, windows and labels every sequence for training.
pub fn training_sequences(items: &[LabeledSequence]) -> Result<Vec<TrainSequence>> {
    items.par_iter().map(|item| Ok(TrainSequence::from_prepared(&prepare(item)?))).collect()
}

/// Offline decisions for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePrediction {
    pub id: String,
    pub end_times: Vec<f64>,
    pub decisions: Vec<WindowDecision>,
}

/// Batch inference: median filter over the whole sequence, windowing, then
/// the ensemble window by window from a zero state.
pub fn predict(model: &EnsembleModel, item: &LabeledSequence, id: String) -> Result<SequencePrediction> {
    let prepared = prepare_unlabeled(&item.sequence, DEFAULT_MEDIAN_WINDOW)?;
    let windows = window_matrix(&prepared, model.config().input_dim);
    let decisions = model.forward(windows.view())?;
    Ok(SequencePrediction { id, end_times: prepared.end_times(), decisions })
}

pub fn predict_all(model: &EnsembleModel, items: &[LabeledSequence]) -> Result<Vec<SequencePrediction>> {
    items.par_iter().enumerate().map(|(i, item)| predict(model, item, sequence_id(item, i))).collect()
}

/// Predictions and verdicts for every sequence, in input order.
pub fn evaluate_model(model: &EnsembleModel, items: &[LabeledSequence]) -> Result<Vec<SequenceOutcome>> {
    let predictions = predict_all(model, items)?;
    predictions
        .iter()
        .zip(items)
        .map(|(p, item)| {
            let labels: Vec<_> = p.decisions.iter().map(|d| d.decision).collect();
            judge_sequence(&p.id, &labels, &p.end_times, &item.annotation)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_scale_split_counts() {
        let mut classes = vec![SequenceClass::Slip; 200];
        classes.extend([SequenceClass::Stop; 28]);
        let split = stratified_split(&classes, 0.8, 3).unwrap();
        let count = |idx: &[usize], c| idx.iter().filter(|&&i| classes[i] == c).count();
        assert_eq!((count(&split.train, SequenceClass::Slip), count(&split.train, SequenceClass::Stop)), (160, 23));
        assert_eq!((count(&split.test, SequenceClass::Slip), count(&split.test, SequenceClass::Stop)), (40, 5));
        let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..228).collect::<Vec<_>>());
        assert_eq!(split, stratified_split(&classes, 0.8, 3).unwrap());
        assert_ne!(split, stratified_split(&classes, 0.8, 4).unwrap());
    }

    #[test]
    fn split_edge_cases() {
        let split = stratified_split(&[SequenceClass::Slip; 3], 1.0, 0).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (3, 0));
        assert!(stratified_split(&[], 0.8, 0).unwrap().train.is_empty());
        assert!(stratified_split(&[SequenceClass::Slip], 0.0, 0).is_err());
    }
}
