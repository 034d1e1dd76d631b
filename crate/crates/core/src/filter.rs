//! Running median filter used to suppress sensor glitches.
//!
//! The batch filter is centered: output `i` is the median of the inputs in
//! `[i - w/2, i + w/2]`, clipped to the sequence bounds. Clipped windows may
//! hold an even number of values; their median is the mean of the two middle
//! values. [`StreamingMedian`] produces bit-identical output from frames
//! pushed one at a time.

use std::collections::VecDeque;

use crate::error::{CoreError, Result};
use crate::frame::{PillarFrame, TactileSequence, AXES, PILLAR_COUNT};

pub const DEFAULT_MEDIAN_WINDOW: usize = 21;

/// Median of `values`, reordering them. Panics on an empty slice.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn check_window(w: usize) -> Result<()> {
    if w == 0 || w % 2 == 0 {
        return Err(CoreError::InvalidParameter(format!(
            "median window must be a positive odd integer, got {w}"
        )));
    }
    Ok(())
}

/// Centered running median of a single channel with shrinking edges.
pub fn median_filter_channel(input: &[f64], w: usize) -> Result<Vec<f64>> {
    check_window(w)?;
    let half = w / 2;
    let mut scratch = Vec::with_capacity(w);
    Ok((0..input.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(input.len() - 1);
            scratch.clear();
            scratch.extend_from_slice(&input[lo..=hi]);
            median_in_place(&mut scratch)
        })
        .collect())
}

/// Median of each force channel over `frames`, stamped with `t`.
fn median_frame(frames: impl Iterator<Item = PillarFrame> + Clone, t: f64, scratch: &mut Vec<f64>) -> PillarFrame {
    let mut out = PillarFrame::zeros(t);
    for p in 0..PILLAR_COUNT {
        for a in 0..AXES {
            scratch.clear();
            scratch.extend(frames.clone().map(|f| f.forces[p][a]));
            out.forces[p][a] = median_in_place(scratch);
        }
    }
    out
}

/// Filters every force channel independently; timestamps and metadata are
/// unchanged.
pub fn median_filter(seq: &TactileSequence, w: usize) -> Result<TactileSequence> {
    check_window(w)?;
    if seq.is_empty() {
        return Err(CoreError::InvalidParameter("cannot filter an empty sequence".into()));
    }
    let half = w / 2;
    let n = seq.len();
    let mut scratch = Vec::with_capacity(w);
    let frames = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            median_frame(seq.frames[lo..=hi].iter().copied(), seq.frames[i].t, &mut scratch)
        })
        .collect();
    Ok(TactileSequence::new(seq.meta.clone(), frames))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MedianMode {
    /// Centered window, output delayed by `w / 2` frames. Matches
    /// [`median_filter`] exactly once the stream is finished.
    Centered,
    /// Trailing window over the last `w` frames; no delay.
    Causal,
}

/// Incremental median filter over frames.
#[derive(Debug, Clone)]
pub struct StreamingMedian {
    window: usize,
    mode: MedianMode,
    /// Raw frames, the first of which has absolute index `buffer_start`.
    buffer: VecDeque<PillarFrame>,
    buffer_start: usize,
    received: usize,
    next_out: usize,
    scratch: Vec<f64>,
}

impl StreamingMedian {
    pub fn new(window: usize, mode: MedianMode) -> Result<Self> {
        check_window(window)?;
        Ok(Self {
            window,
            mode,
            buffer: VecDeque::with_capacity(window + 1),
            buffer_start: 0,
            received: 0,
            next_out: 0,
            scratch: Vec::with_capacity(window),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn mode(&self) -> MedianMode {
        self.mode
    }

    /// Output delay in frames.
    pub fn lag_frames(&self) -> usize {
        match self.mode {
            MedianMode::Centered => self.window / 2,
            MedianMode::Causal => 0,
        }
    }

    pub fn reset(&mut self) {
        self.buffer.clear();
        self.buffer_start = 0;
        self.received = 0;
        self.next_out = 0;
    }

    fn emit(&mut self, center: usize, last: usize) -> PillarFrame {
        let half = self.window / 2;
        let lo = match self.mode {
            MedianMode::Centered => center.saturating_sub(half),
            MedianMode::Causal => center.saturating_sub(self.window - 1),
        };
        let t = self.buffer[center - self.buffer_start].t;
        let range = (lo - self.buffer_start)..=(last - self.buffer_start);
        median_frame(self.buffer.range(range).copied(), t, &mut self.scratch)
    }

    fn trim(&mut self) {
        let keep_from = match self.mode {
            MedianMode::Centered => self.next_out.saturating_sub(self.window / 2),
            MedianMode::Causal => (self.next_out).saturating_sub(self.window - 1),
        };
        while self.buffer_start < keep_from {
            self.buffer.pop_front();
            self.buffer_start += 1;
        }
    }

    /// Feeds one raw frame and appends any filtered frames now available.
    pub fn push(&mut self, frame: PillarFrame, out: &mut Vec<PillarFrame>) {
        self.buffer.push_back(frame);
        let newest = self.received;
        self.received += 1;
        match self.mode {
            MedianMode::Centered => {
                let half = self.window / 2;
                while self.next_out + half <= newest {
                    let f = self.emit(self.next_out, self.next_out + half);
                    out.push(f);
                    self.next_out += 1;
                }
            }
            MedianMode::Causal => {
                let f = self.emit(newest, newest);
                out.push(f);
                self.next_out += 1;
            }
        }
        self.trim();
    }

    /// Flushes the frames still waiting for lookahead, using shrunken
    /// windows at the end of the stream.
    pub fn finish(&mut self, out: &mut Vec<PillarFrame>) {
        if self.received == 0 {
            return;
        }
        let last = self.received - 1;
        let half = self.window / 2;
        while self.next_out <= last {
            let hi = (self.next_out + half).min(last);
            let f = self.emit(self.next_out, hi);
            out.push(f);
            self.next_out += 1;
        }
        self.trim();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{grid_time, Movement, SequenceMeta};
    use proptest::prelude::*;

    // Oracle: sort every clipped window from scratch.
    fn brute_force(input: &[f64], w: usize) -> Vec<f64> {
        let half = (w / 2) as isize;
        (0..input.len() as isize)
            .map(|i| {
                let mut v: Vec<f64> = (i - half..=i + half)
                    .filter(|&j| j >= 0 && (j as usize) < input.len())
                    .map(|j| input[j as usize])
                    .collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let n = v.len();
                if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
            })
            .collect()
    }

    fn seq_from_channel(values: &[f64]) -> TactileSequence {
        let frames = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut f = PillarFrame::zeros(grid_time(0.0, i));
                for (p, forces) in f.forces.iter_mut().enumerate() {
                    *forces = [v * (p + 1) as f64, -v, 0.5 * v];
                }
                f
            })
            .collect();
        TactileSequence::new(SequenceMeta::new(Movement::Translation, 1.0, 8.0), frames)
    }

    #[test]
    fn documented_examples() {
        assert_eq!(median_filter_channel(&[2.0; 5], 3).unwrap(), vec![2.0; 5]);
        assert_eq!(median_filter_channel(&[0.0, 0.0, 9.0, 0.0, 0.0], 3).unwrap(), vec![0.0; 5]);
        assert_eq!(
            median_filter_channel(&[1.0, 2.0, 3.0, 4.0, 5.0], 3).unwrap(),
            vec![1.5, 2.0, 3.0, 4.0, 4.5]
        );
        let glitch = [0.0, 0.0, 9.0, 0.0, 0.0];
        assert_eq!(brute_force(&glitch, 3), vec![0.0; 5]);
    }

    #[test]
    fn even_window_rejected() {
        assert!(median_filter_channel(&[1.0], 4).is_err());
        assert!(median_filter(&seq_from_channel(&[1.0, 2.0]), 20).is_err());
        assert!(StreamingMedian::new(0, MedianMode::Centered).is_err());
    }

    #[test]
    fn empty_sequence_rejected() {
        assert!(median_filter(&seq_from_channel(&[]), 21).is_err());
    }

    #[test]
    fn glitch_removed_by_default_window() {
        let mut values: Vec<f64> = (0..200).map(|i| (i as f64 * 0.05).sin()).collect();
        values[100] += 20.0;
        let out = median_filter_channel(&values, DEFAULT_MEDIAN_WINDOW).unwrap();
        assert!(out.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn streaming_centered_matches_batch() {
        let values: Vec<f64> = (0..137).map(|i| ((i * 37) % 17) as f64 - 8.0).collect();
        let seq = seq_from_channel(&values);
        let batch = median_filter(&seq, 21).unwrap();
        let mut stream = StreamingMedian::new(21, MedianMode::Centered).unwrap();
        let mut out = Vec::new();
        for (i, f) in seq.frames.iter().enumerate() {
            stream.push(*f, &mut out);
            assert_eq!(out.len(), (i + 1).saturating_sub(10));
        }
        stream.finish(&mut out);
        assert_eq!(out, batch.frames);
    }

    #[test]
    fn streaming_causal_uses_trailing_window() {
        let values = [1.0, 5.0, 3.0, 4.0, 2.0];
        let seq = seq_from_channel(&values);
        let mut stream = StreamingMedian::new(3, MedianMode::Causal).unwrap();
        let mut out = Vec::new();
        for f in &seq.frames {
            stream.push(*f, &mut out);
        }
        let fx0: Vec<f64> = out.iter().map(|f| f.forces[0][0]).collect();
        assert_eq!(fx0, vec![1.0, 3.0, 3.0, 4.0, 3.0]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(values in prop::collection::vec(-50.0f64..50.0, 1..120), half in 0usize..12) {
            let w = 2 * half + 1;
            prop_assert_eq!(median_filter_channel(&values, w).unwrap(), brute_force(&values, w));
        }

        #[test]
        fn bounded_by_channel_range(values in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            let out = median_filter_channel(&values, 21).unwrap();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(out.iter().all(|&v| v >= lo && v <= hi));
        }

        #[test]
        fn idempotent_on_monotone(mut values in prop::collection::vec(-1e3f64..1e3, 1..100)) {
            values.sort_by(f64::total_cmp);
            let once = median_filter_channel(&values, 3).unwrap();
            let twice = median_filter_channel(&once, 3).unwrap();
            // shrunken edge windows average two values, so only the interior is a fixed point
            let n = values.len();
            if n > 2 {
                prop_assert_eq!(&once[1..n - 1], &twice[1..n - 1]);
                prop_assert_eq!(&once[1..n - 1], &values[1..n - 1]);
            }
        }

        #[test]
        fn commutes_with_positive_scaling(values in prop::collection::vec(-1e3f64..1e3, 1..100), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
            let a = median_filter_channel(&scaled, 5).unwrap();
            let b: Vec<f64> = median_filter_channel(&values, 5).unwrap().iter().map(|v| c * v).collect();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn stream_equals_batch(values in prop::collection::vec(-10.0f64..10.0, 1..90), half in 0usize..11) {
            let w = 2 * half + 1;
            let seq = seq_from_channel(&values);
            let batch = median_filter(&seq, w).unwrap();
            let mut stream = StreamingMedian::new(w, MedianMode::Centered).unwrap();
            let mut out = Vec::new();
            for f in &seq.frames {
                stream.push(*f, &mut out);
            }
            stream.finish(&mut out);
            prop_assert_eq!(out, batch.frames);
        }
    }
}
