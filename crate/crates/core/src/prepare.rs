//! The refinement chain applied before classification: median filter,
//! windowing and window labels.

use crate::annotation::{window_labels, SlipAnnotation};
use crate::dataset::LabeledSequence;
use crate::error::Result;
use crate::filter::{median_filter, DEFAULT_MEDIAN_WINDOW};
use crate::frame::TactileSequence;
use crate::window::{segment_windows, WindowLabel, WindowedSample};

/// Windows of one sequence, ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSequence {
    pub windows: Vec<WindowedSample>,
}

impl PreparedSequence {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = WindowLabel> + '_ {
        self.windows.iter().map(|w| w.label)
    }

    pub fn end_times(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.window_end_t).collect()
    }
}

/// Filters and windows a sequence; labels are left as `Other`.
pub fn prepare_unlabeled(seq: &TactileSequence, median_window: usize) -> Result<PreparedSequence> {
    if seq.is_empty() {
        return Ok(PreparedSequence { windows: Vec::new() });
    }
    let filtered = median_filter(seq, median_window)?;
    Ok(PreparedSequence { windows: segment_windows(&filtered).windows })
}

pub fn prepare_with(seq: &TactileSequence, annotation: &SlipAnnotation, median_window: usize) -> Result<PreparedSequence> {
    let mut prepared = prepare_unlabeled(seq, median_window)?;
    window_labels(annotation, &mut prepared.windows);
    Ok(prepared)
}

/// Default chain: 21-sample median, 40-sample windows, labels.
pub fn prepare(item: &LabeledSequence) -> Result<PreparedSequence> {
    prepare_with(&item.sequence, &item.annotation, DEFAULT_MEDIAN_WINDOW)
}

pub fn prepare_all(items: &[LabeledSequence]) -> Result<Vec<PreparedSequence>> {
    items.iter().map(prepare).collect()
}
