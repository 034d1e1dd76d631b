//! Per-sequence verdicts.
//!
//! The verdict names follow this detector's reporting convention,
//! which is not the textbook mapping: a slip sequence with no timely
//! detection is a false positive, and a stop sequence with any detection
//! is a false negative.

use serde::{Deserialize, Serialize};
use tactislip_core::{SequenceClass, SlipAnnotation, WindowLabel};

use crate::{EvalError, Result};

/// How far before the labeled start a detection still counts, seconds.
pub const EARLY_TOLERANCE_S: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    /// Slip detected in time.
    TP,
    /// Detection in a stop sequence.
    FN,
    /// Slip sequence without a qualifying detection.
    FP,
    /// Stop sequence without any detection.
    TN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceOutcome {
    pub id: String,
    pub class: SequenceClass,
    /// End time of the first window decided incipient.
    pub detection_time: Option<f64>,
    pub incipient_start: Option<f64>,
    pub incipient_end: Option<f64>,
    pub verdict: Verdict,
}

impl SequenceOutcome {
    /// `detection_time − incipient_start`, for timely detections.
    pub fn latency(&self) -> Option<f64> {
        match (self.verdict, self.detection_time, self.incipient_start) {
            (Verdict::TP, Some(d), Some(s)) => Some(d - s),
            _ => None,
        }
    }
}

/// Interval a slip detection must fall in, before the early tolerance is
/// applied. Slip runs whose pillars all let go within one frame carry no
/// interval; their first onset serves as both ends.
pub fn reference_interval(annotation: &SlipAnnotation) -> Option<(f64, f64)> {
    annotation.incipient.or_else(|| {
        annotation
            .pillar_slip_onset
            .iter()
            .flatten()
            .copied()
            .min_by(f64::total_cmp)
            .map(|t| (t, t))
    })
}

/// Judges one sequence from its per-window decisions and window end times.
pub fn judge_sequence(id: &str, decisions: &[WindowLabel], end_times: &[f64], annotation: &SlipAnnotation) -> Result<SequenceOutcome> {
    if decisions.len() != end_times.len() {
        return Err(EvalError::InvalidInput(format!(
            "{id}: {} decisions for {} windows",
            decisions.len(),
            end_times.len()
        )));
    }
    let detection_time = decisions.iter().zip(end_times).find(|(d, _)| **d == WindowLabel::Incipient).map(|(_, &t)| t);
    let interval = match annotation.class {
        SequenceClass::Slip => Some(
            reference_interval(annotation)
                .ok_or_else(|| EvalError::InvalidInput(format!("{id}: slip sequence without any onset")))?,
        ),
        SequenceClass::Stop => None,
    };
    let verdict = match (annotation.class, detection_time, interval) {
        (SequenceClass::Slip, Some(t), Some((start, end))) if t >= start - EARLY_TOLERANCE_S && (t < end || start == end && t <= end) => {
            Verdict::TP
        }
        (SequenceClass::Slip, ..) => Verdict::FP,
        (SequenceClass::Stop, Some(_), _) => Verdict::FN,
        (SequenceClass::Stop, None, _) => Verdict::TN,
    };
    Ok(SequenceOutcome {
        id: id.to_owned(),
        class: annotation.class,
        detection_time,
        incipient_start: interval.map(|(s, _)| s),
        incipient_end: interval.map(|(_, e)| e),
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tactislip_core::PILLAR_COUNT;

    fn slip(start: f64, end: f64) -> SlipAnnotation {
        let mut onsets = [None; PILLAR_COUNT];
        onsets[0] = Some(start);
        onsets[1] = Some(end);
        SlipAnnotation { pillar_slip_onset: onsets, incipient: Some((start, end)), class: SequenceClass::Slip }
    }

    fn detect_at(k: usize, n: usize) -> (Vec<WindowLabel>, Vec<f64>) {
        let times = (0..n).map(|i| 0.039 + 0.04 * i as f64).collect();
        let labels = (0..n).map(|i| if i >= k { WindowLabel::Incipient } else { WindowLabel::Other }).collect();
        (labels, times)
    }

    #[test]
    fn early_detection_within_tolerance_is_tp() {
        let (d, t) = detect_at(0, 3);
        let times: Vec<f64> = t.iter().map(|x| x + 0.281).collect();
        let o = judge_sequence("a", &d, &times, &slip(0.40, 0.60)).unwrap();
        assert_eq!(o.detection_time, Some(times[0]));
        assert_eq!(o.verdict, Verdict::TP);
        assert!((o.latency().unwrap() + 0.08).abs() < 1e-12);
    }

    #[test]
    fn too_early_or_too_late_is_fp() {
        let early = judge_sequence("a", &[WindowLabel::Incipient], &[0.05], &slip(0.40, 0.60)).unwrap();
        assert_eq!(early.verdict, Verdict::FP);
        let late = judge_sequence("a", &[WindowLabel::Other, WindowLabel::Incipient], &[0.5, 0.6], &slip(0.40, 0.60)).unwrap();
        assert_eq!(late.verdict, Verdict::FP);
        let none = judge_sequence("a", &[WindowLabel::Other; 2], &[0.5, 0.6], &slip(0.40, 0.60)).unwrap();
        assert_eq!((none.verdict, none.detection_time), (Verdict::FP, None));
    }

    #[test]
    fn stop_sequences() {
        let stop = SlipAnnotation::stop();
        let (d, t) = detect_at(2, 4);
        assert_eq!(judge_sequence("s", &d, &t, &stop).unwrap().verdict, Verdict::FN);
        let (d, t) = detect_at(9, 4);
        assert_eq!(judge_sequence("s", &d, &t, &stop).unwrap().verdict, Verdict::TN);
        assert_eq!(judge_sequence("s", &[], &[], &stop).unwrap().verdict, Verdict::TN);
    }

    #[test]
    fn decisions_after_the_first_do_not_matter() {
        let a = slip(0.1, 0.3);
        let base = [WindowLabel::Other, WindowLabel::Incipient, WindowLabel::Other, WindowLabel::Other];
        let times = [0.04, 0.08, 0.12, 0.16];
        let o1 = judge_sequence("x", &base, &times, &a).unwrap();
        let mut flipped = base;
        flipped[2] = WindowLabel::Incipient;
        flipped[3] = WindowLabel::Incipient;
        assert_eq!(o1, judge_sequence("x", &flipped, &times, &a).unwrap());
    }

    #[test]
    fn simultaneous_onsets_use_the_onset_instant() {
        let mut onsets = [Some(0.5); PILLAR_COUNT];
        onsets[3] = Some(0.5);
        let a = SlipAnnotation { pillar_slip_onset: onsets, incipient: None, class: SequenceClass::Slip };
        assert_eq!(judge_sequence("x", &[WindowLabel::Incipient], &[0.5], &a).unwrap().verdict, Verdict::TP);
        assert_eq!(judge_sequence("x", &[WindowLabel::Incipient], &[0.52], &a).unwrap().verdict, Verdict::FP);
    }

    #[test]
    fn misaligned_input_is_rejected() {
        assert!(judge_sequence("x", &[WindowLabel::Other], &[], &SlipAnnotation::stop()).is_err());
    }
}
