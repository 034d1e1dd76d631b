//! Confusion counts, detection latency and normalized displacement.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::judge::{SequenceOutcome, Verdict};
use crate::{EvalError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn from_outcomes(outcomes: &[SequenceOutcome]) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(EvalError::InvalidInput("no outcomes to count".into()));
        }
        let mut m = Self::default();
        for o in outcomes {
            m.add(o.verdict);
        }
        Ok(m)
    }

    pub fn add(&mut self, verdict: Verdict) {
        match verdict {
            Verdict::TP => self.tp += 1,
            Verdict::FN => self.fn_ += 1,
            Verdict::FP => self.fp += 1,
            Verdict::TN => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }

    /// `(TP + TN) / total`.
    pub fn success_rate(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total().max(1) as f64
    }

    pub fn misclassifications(&self) -> usize {
        self.fn_ + self.fp
    }

    /// Fraction of stop sequences with a detection.
    pub fn stop_false_alarm_rate(&self) -> f64 {
        self.fn_ as f64 / (self.fn_ + self.tn).max(1) as f64
    }

    /// Cell-wise `self − other`.
    pub fn delta(&self, other: &Self) -> ConfusionDelta {
        let d = |a: usize, b: usize| a as i64 - b as i64;
        ConfusionDelta { tp: d(self.tp, other.tp), fn_: d(self.fn_, other.fn_), fp: d(self.fp, other.fp), tn: d(self.tn, other.tn) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionDelta {
    pub tp: i64,
    #[serde(rename = "fn")]
    pub fn_: i64,
    pub fp: i64,
    pub tn: i64,
}

/// Latency statistics over timely detections, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p10_ms: f64,
    pub p90_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

/// Latencies of the TP outcomes, in milliseconds.
pub fn latencies_ms(outcomes: &[SequenceOutcome]) -> Vec<f64> {
    outcomes.iter().filter_map(SequenceOutcome::latency).map(|s| s * 1e3).collect()
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Summary of TP latencies; `None` when there are none.
pub fn detection_latency(outcomes: &[SequenceOutcome]) -> Option<LatencySummary> {
    let mut v = latencies_ms(outcomes);
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(LatencySummary {
        count: v.len(),
        mean_ms: v.iter().sum::<f64>() / v.len() as f64,
        median_ms: percentile(&v, 0.5),
        p10_ms: percentile(&v, 0.1),
        p90_ms: percentile(&v, 0.9),
        min_ms: v[0],
        max_ms: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Fixed-width histogram covering `[lo, hi)`; values outside are clamped
/// into the end bins.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && hi > lo) {
        return Err(EvalError::InvalidInput(format!("bad histogram range [{lo}, {hi}) / {bin_width}")));
    }
    let bins = ((hi - lo) / bin_width).ceil() as usize;
    let edges = (0..=bins).map(|i| lo + i as f64 * bin_width).collect();
    let mut counts = vec![0; bins];
    for v in values {
        let i = ((v - lo) / bin_width).floor().clamp(0.0, (bins - 1) as f64) as usize;
        counts[i] += 1;
    }
    Ok(Histogram { edges, counts })
}

impl Histogram {
    /// Rows of `bin_start_ms,bin_end_ms,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_start_ms", "bin_end_ms", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([self.edges[i].to_string(), self.edges[i + 1].to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gross-slip threshold for translation, mm.
pub const TRANSLATION_THRESHOLD_MM: f64 = 2.0;
/// Gross-slip threshold for rotation, degrees.
pub const ROTATION_THRESHOLD_DEG: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Displacement {
    Translation { mm: f64 },
    Rotation { deg: f64 },
    Compound { mm: f64, deg: f64 },
}

/// Displacement over its gross-slip threshold; a compound motion takes
/// the mean of its two normalized parts.
pub fn normalized_displacement(d: Displacement) -> f64 {
    match d {
        Displacement::Translation { mm } => mm / TRANSLATION_THRESHOLD_MM,
        Displacement::Rotation { deg } => deg / ROTATION_THRESHOLD_DEG,
        Displacement::Compound { mm, deg } => 0.5 * (mm / TRANSLATION_THRESHOLD_MM + deg / ROTATION_THRESHOLD_DEG),
    }
}
