//! Slip labels: per-pillar onsets, the incipient interval, and window labels.
//!
//! Incipient slip spans from the first considered pillar's slip onset to the
//! moment every considered pillar has slipped. Pure rotation turns about the
//! center pillar, which therefore never slips and is left out.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::frame::{Movement, CENTER_PILLAR, PILLAR_COUNT};
use crate::window::{WindowLabel, WindowedSample};

pub type Onsets = [Option<f64>; PILLAR_COUNT];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceClass {
    Slip,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlipAnnotation {
    pub pillar_slip_onset: Onsets,
    /// Closed interval `[start, end]`, absent for stop sequences and for
    /// slip sequences in which no considered pillar stays stuck past the
    /// first onset.
    pub incipient: Option<(f64, f64)>,
    pub class: SequenceClass,
}

impl SlipAnnotation {
    pub fn stop() -> Self {
        Self { pillar_slip_onset: [None; PILLAR_COUNT], incipient: None, class: SequenceClass::Stop }
    }

    pub fn incipient_start(&self) -> Option<f64> {
        self.incipient.map(|(s, _)| s)
    }

    pub fn incipient_end(&self) -> Option<f64> {
        self.incipient.map(|(_, e)| e)
    }

    /// Earliest considered onset, present for every slip sequence.
    pub fn first_onset(&self, movement: Movement) -> Option<f64> {
        considered_pillars(movement)
            .filter_map(|p| self.pillar_slip_onset[p])
            .min_by(f64::total_cmp)
    }
}

/// Pillars that count toward the incipient interval.
pub fn considered_pillars(movement: Movement) -> impl Iterator<Item = usize> {
    (0..PILLAR_COUNT).filter(move |&p| movement != Movement::Rotation || p != CENTER_PILLAR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipMotionThreshold {
    /// Tip speed relative to the contact surface, mm/s.
    pub speed_mm_s: f64,
    /// Consecutive samples the speed must stay above threshold.
    pub debounce_samples: usize,
}

impl Default for TipMotionThreshold {
    fn default() -> Self {
        Self { speed_mm_s: 0.1, debounce_samples: 5 }
    }
}

/// Per-pillar gross-slip onset from tip-speed series aligned with `times`.
///
/// The onset is the first sample of the first run of at least
/// `debounce_samples` consecutive samples strictly above the threshold.
pub fn pillar_slip_from_tip_motion(
    times: &[f64],
    tip_speed: &[Vec<f64>; PILLAR_COUNT],
    threshold: TipMotionThreshold,
) -> Result<Onsets> {
    if !(threshold.speed_mm_s >= 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "slip speed threshold must be non-negative, got {}",
            threshold.speed_mm_s
        )));
    }
    let need = threshold.debounce_samples.max(1);
    let mut onsets = [None; PILLAR_COUNT];
    for (p, series) in tip_speed.iter().enumerate() {
        if series.len() != times.len() {
            return Err(CoreError::InvalidParameter(format!(
                "pillar {p} tip-speed series has {} samples, expected {}",
                series.len(),
                times.len()
            )));
        }
        let mut run = 0;
        for (i, &v) in series.iter().enumerate() {
            if v > threshold.speed_mm_s {
                run += 1;
                if run == need {
                    onsets[p] = Some(times[i + 1 - need]);
                    break;
                }
            } else {
                run = 0;
            }
        }
    }
    Ok(onsets)
}

/// Incipient interval assuming every pillar is in contact.
pub fn incipient_interval(onsets: &Onsets, movement: Movement) -> SlipAnnotation {
    incipient_interval_with_contact(onsets, movement, &[true; PILLAR_COUNT])
}

/// Incipient interval over the movement's considered pillars that are in
/// contact. Onsets of pillars outside that set are kept but ignored.
pub fn incipient_interval_with_contact(
    onsets: &Onsets,
    movement: Movement,
    contact: &[bool; PILLAR_COUNT],
) -> SlipAnnotation {
    let considered: Vec<usize> = considered_pillars(movement).filter(|&p| contact[p]).collect();
    let present: Vec<f64> = considered.iter().filter_map(|&p| onsets[p]).collect();
    if present.is_empty() {
        return SlipAnnotation { pillar_slip_onset: *onsets, incipient: None, class: SequenceClass::Stop };
    }
    let start = present.iter().copied().fold(f64::INFINITY, f64::min);
    let end = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let someone_stuck = considered.iter().any(|&p| onsets[p].map_or(true, |t| t > start));
    SlipAnnotation {
        pillar_slip_onset: *onsets,
        incipient: someone_stuck.then_some((start, end)),
        class: SequenceClass::Slip,
    }
}

/// Label of a window ending at `window_end_t`.
pub fn label_at(annotation: &SlipAnnotation, window_end_t: f64) -> WindowLabel {
    match (annotation.class, annotation.incipient) {
        (SequenceClass::Slip, Some((start, end))) if window_end_t >= start && window_end_t <= end => {
            WindowLabel::Incipient
        }
        _ => WindowLabel::Other,
    }
}

/// Assigns each window the label of its final sample.
pub fn window_labels(annotation: &SlipAnnotation, windows: &mut [WindowedSample]) {
    for w in windows {
        w.label = label_at(annotation, w.window_end_t);
    }
}

/// Sidecar record; `incipient` serializes as `[start, end]` or `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct AnnotationRecord {
    pub pillar_slip_onset: Onsets,
    pub incipient: Option<[f64; 2]>,
    pub class: SequenceClass,
}

impl From<&SlipAnnotation> for AnnotationRecord {
    fn from(a: &SlipAnnotation) -> Self {
        Self {
            pillar_slip_onset: a.pillar_slip_onset,
            incipient: a.incipient.map(|(s, e)| [s, e]),
            class: a.class,
        }
    }
}

impl From<AnnotationRecord> for SlipAnnotation {
    fn from(r: AnnotationRecord) -> Self {
        Self {
            pillar_slip_onset: r.pillar_slip_onset,
            incipient: r.incipient.map(|[s, e]| (s, e)),
            class: r.class,
        }
    }
}
