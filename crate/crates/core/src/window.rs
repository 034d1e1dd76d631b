//! Fixed-length windowing and x–y feature extraction.

use serde::{Deserialize, Serialize};

use crate::frame::{PillarFrame, TactileSequence, PILLAR_COUNT};

/// Samples per window (40 ms at 1 kHz, 25 Hz decision rate).
pub const WINDOW_LEN: usize = 40;
/// fx and fy for each pillar.
pub const FEATURE_CHANNELS: usize = 2 * PILLAR_COUNT;
/// Flattened window length fed to the network.
pub const WINDOW_FEATURES: usize = WINDOW_LEN * FEATURE_CHANNELS;
pub const WINDOW_PERIOD_S: f64 = WINDOW_LEN as f64 / crate::frame::SAMPLE_RATE_HZ;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowLabel {
    Incipient,
    Other,
}

impl WindowLabel {
    /// Class index used by the network: 0 = incipient, 1 = other.
    pub fn class_index(self) -> usize {
        match self {
            WindowLabel::Incipient => 0,
            WindowLabel::Other => 1,
        }
    }
}

/// `[fx0, fy0, fx1, fy1, ..., fx8, fy8]`; fz is dropped.
pub fn select_xy_features(frame: &PillarFrame) -> [f64; FEATURE_CHANNELS] {
    let mut out = [0.0; FEATURE_CHANNELS];
    for (p, f) in frame.forces.iter().enumerate() {
        out[2 * p] = f[0];
        out[2 * p + 1] = f[1];
    }
    out
}

/// One 40-sample window, stored row-major as 40 × 18.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub features: Vec<f64>,
    pub label: WindowLabel,
    pub window_end_t: f64,
}

impl WindowedSample {
    /// Builds a window from exactly [`WINDOW_LEN`] frames, labeled `Other`.
    pub fn from_frames(frames: &[PillarFrame]) -> Self {
        assert_eq!(frames.len(), WINDOW_LEN, "window needs exactly {WINDOW_LEN} frames");
        let mut features = Vec::with_capacity(WINDOW_FEATURES);
        for f in frames {
            features.extend_from_slice(&select_xy_features(f));
        }
        Self { features, label: WindowLabel::Other, window_end_t: frames[WINDOW_LEN - 1].t }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub windows: Vec<WindowedSample>,
    /// Trailing frames that did not fill a window.
    pub dropped_tail: usize,
    /// Set when the input held fewer frames than one window.
    pub too_short: bool,
}

/// Splits a (filtered) sequence into non-overlapping windows; the trailing
/// remainder is discarded.
pub fn segment_windows(seq: &TactileSequence) -> Segmentation {
    let windows: Vec<_> =
        seq.frames.chunks_exact(WINDOW_LEN).map(WindowedSample::from_frames).collect();
    let too_short = seq.len() < WINDOW_LEN;
    if too_short {
        log::warn!("sequence of {} frames is shorter than one window", seq.len());
    }
    Segmentation { windows, dropped_tail: seq.len() % WINDOW_LEN, too_short }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{grid_time, Movement, SequenceMeta};
    use proptest::prelude::*;

    fn seq(n: usize) -> TactileSequence {
        let frames = (0..n).map(|i| PillarFrame::zeros(grid_time(0.0, i))).collect();
        TactileSequence::new(SequenceMeta::new(Movement::Translation, 1.0, 8.0), frames)
    }

    #[test]
    fn window_counts() {
        assert_eq!(segment_windows(&seq(200)).windows.len(), 5);
        let s = segment_windows(&seq(239));
        assert_eq!((s.windows.len(), s.dropped_tail), (5, 39));
        let s = segment_windows(&seq(39));
        assert!(s.windows.is_empty() && s.too_short);
    }

    #[test]
    fn exhaustive_floor_rule() {
        for n in 0..1000 {
            assert_eq!(segment_windows(&seq(n)).windows.len(), n / WINDOW_LEN);
        }
    }

    #[test]
    fn window_end_time_is_last_frame() {
        let s = segment_windows(&seq(120));
        assert_eq!(s.windows[1].window_end_t, grid_time(0.0, 79));
    }

    #[test]
    fn feature_examples() {
        assert_eq!(select_xy_features(&PillarFrame::zeros(0.0)), [0.0; 18]);
        let mut f = PillarFrame::zeros(0.0);
        for p in 0..PILLAR_COUNT {
            f.forces[p][2] = 5.0;
        }
        assert_eq!(select_xy_features(&f), [0.0; 18]);
        f.forces[4] = [1.0, -2.0, 5.0];
        let v = select_xy_features(&f);
        assert_eq!((v[8], v[9]), (1.0, -2.0));
        assert_eq!(v.iter().filter(|x| **x != 0.0).count(), 2);
    }

    fn arb_frame() -> impl Strategy<Value = PillarFrame> {
        prop::collection::vec(-10.0f64..10.0, 27).prop_map(|v| {
            let mut f = PillarFrame::zeros(0.0);
            for (i, x) in v.into_iter().enumerate() {
                f.forces[i / 3][i % 3] = x;
            }
            f
        })
    }

    proptest! {
        #[test]
        fn features_are_linear(f in arb_frame(), g in arb_frame(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let mut combo = PillarFrame::zeros(0.0);
            for p in 0..PILLAR_COUNT {
                for k in 0..3 {
                    combo.forces[p][k] = a * f.forces[p][k] + b * g.forces[p][k];
                }
            }
            let lhs = select_xy_features(&combo);
            let (ff, gg) = (select_xy_features(&f), select_xy_features(&g));
            for i in 0..FEATURE_CHANNELS {
                prop_assert!((lhs[i] - (a * ff[i] + b * gg[i])).abs() < 1e-12);
            }
        }
    }
}
