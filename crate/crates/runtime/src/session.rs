//! The detector session: streaming median, window buffer, recurrent
//! state and event log.

use std::time::{Duration, Instant};

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};
use tactislip_core::frame::SAMPLE_PERIOD_S;
use tactislip_core::{MedianMode, PillarFrame, StreamingMedian, WindowLabel, WindowedSample, DEFAULT_MEDIAN_WINDOW, WINDOW_LEN};
use tactislip_nn::{EnsembleModel, EnsembleState};

use crate::{Result, RuntimeError};

/// Compute budget per window: one window period at 25 Hz.
pub const DEADLINE_MS: f64 = 25.0;

/// Source of monotonic time.
pub trait Clock {
    fn now(&self) -> Duration;
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    start: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self { start: Instant::now() }
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionOptions {
    pub median_window: usize,
    /// `Centered` reproduces offline decisions exactly at a fixed lag;
    /// `Causal` removes the lag and gives up that equivalence.
    #[serde(with = "mode_name")]
    pub mode: MedianMode,
    pub deadline_ms: f64,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self { median_window: DEFAULT_MEDIAN_WINDOW, mode: MedianMode::Centered, deadline_ms: DEADLINE_MS }
    }
}

mod mode_name {
    use serde::{Deserialize, Deserializer, Serializer};
    use tactislip_core::MedianMode;

    pub fn serialize<S: Serializer>(mode: &MedianMode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match mode {
            MedianMode::Centered => "centered",
            MedianMode::Causal => "causal",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MedianMode, D::Error> {
        match String::deserialize(d)?.as_str() {
            "centered" => Ok(MedianMode::Centered),
            "causal" => Ok(MedianMode::Causal),
            other => Err(serde::de::Error::custom(format!("unknown median mode `{other}`"))),
        }
    }
}

/// One decision, serialized as a JSON-Lines record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEvent {
    /// End time of the window, seconds.
    pub t: f64,
    pub p_mean: f64,
    pub decision: WindowLabel,
    pub compute_ms: f64,
    pub deadline_miss: bool,
    pub filter_lag_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub t: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogEntry {
    Decision(DecisionEvent),
    Error(ErrorEvent),
}

pub struct DetectorSession<C: Clock = MonotonicClock> {
    model: EnsembleModel,
    state: EnsembleState,
    filter: StreamingMedian,
    window: Vec<PillarFrame>,
    filtered: Vec<PillarFrame>,
    last_t: Option<f64>,
    accepted: usize,
    options: SessionOptions,
    clock: C,
    log: Vec<LogEntry>,
}

impl DetectorSession<MonotonicClock> {
    pub fn new(model: EnsembleModel, options: SessionOptions) -> Result<Self> {
        Self::with_clock(model, options, MonotonicClock::default())
    }
}

impl<C: Clock> DetectorSession<C> {
    pub fn with_clock(model: EnsembleModel, options: SessionOptions, clock: C) -> Result<Self> {
        let filter = StreamingMedian::new(options.median_window, options.mode)?;
        Ok(Self {
            state: model.initial_state(),
            model,
            filter,
            window: Vec::with_capacity(WINDOW_LEN),
            filtered: Vec::with_capacity(2),
            last_t: None,
            accepted: 0,
            options,
            clock,
            log: Vec::new(),
        })
    }

    pub fn model(&self) -> &EnsembleModel {
        &self.model
    }

    pub fn options(&self) -> &SessionOptions {
        &self.options
    }

    /// Filter delay declared on every event.
    pub fn filter_lag_ms(&self) -> f64 {
        self.filter.lag_frames() as f64 * SAMPLE_PERIOD_S * 1e3
    }

    /// Frames accepted since the last reset.
    pub fn accepted(&self) -> usize {
        self.accepted
    }

    pub fn buffered(&self) -> usize {
        self.window.len()
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<LogEntry> {
        std::mem::take(&mut self.log)
    }

    /// Records an error that arose outside the session, such as an
    /// unparsable input line.
    pub fn log_error(&mut self, t: Option<f64>, error: &RuntimeError) {
        self.log.push(LogEntry::Error(ErrorEvent { t, error: error.to_string() }));
    }

    /// Accepts one raw frame. Out-of-order or non-finite frames are
    /// rejected, logged and leave the session unchanged.
    pub fn push_frame(&mut self, frame: PillarFrame) -> Result<Option<DecisionEvent>> {
        if let Some(previous) = self.last_t {
            if !(frame.t > previous) {
                let err = RuntimeError::OutOfOrder { t: frame.t, previous };
                self.log_error(Some(frame.t), &err);
                return Err(err);
            }
        }
        if !frame.is_finite() {
            let err = RuntimeError::NonFiniteFrame { t: frame.t };
            self.log_error(frame.t.is_finite().then_some(frame.t), &err);
            return Err(err);
        }
        self.last_t = Some(frame.t);
        self.accepted += 1;
        let mut filtered = std::mem::take(&mut self.filtered);
        self.filter.push(frame, &mut filtered);
        let events = self.absorb(&mut filtered);
        self.filtered = filtered;
        let mut events = events?;
        debug_assert!(events.len() <= 1, "one raw frame completes at most one window");
        Ok(events.pop())
    }

    /// Flushes the filter lookahead at the end of a stream. A trailing
    /// partial window is discarded, as in offline windowing.
    pub fn finish(&mut self) -> Result<Vec<DecisionEvent>> {
        let mut filtered = std::mem::take(&mut self.filtered);
        self.filter.finish(&mut filtered);
        let events = self.absorb(&mut filtered);
        self.filtered = filtered;
        self.window.clear();
        events
    }

    /// Zero recurrent state and empty buffers; the log is kept.
    pub fn reset(&mut self) {
        self.state = self.model.initial_state();
        self.filter.reset();
        self.window.clear();
        self.filtered.clear();
        self.last_t = None;
        self.accepted = 0;
    }

    fn absorb(&mut self, filtered: &mut Vec<PillarFrame>) -> Result<Vec<DecisionEvent>> {
        let mut events = Vec::new();
        for frame in filtered.drain(..) {
            self.window.push(frame);
            if self.window.len() == WINDOW_LEN {
                events.push(self.decide()?);
                self.window.clear();
            }
        }
        Ok(events)
    }

    fn decide(&mut self) -> Result<DecisionEvent> {
        let sample = WindowedSample::from_frames(&self.window);
        let start = self.clock.now();
        let decision = self.model.step(&mut self.state, ArrayView1::from(&sample.features))?;
        let compute_ms = (self.clock.now().saturating_sub(start)).as_secs_f64() * 1e3;
        let deadline_miss = compute_ms > self.options.deadline_ms;
        if deadline_miss {
            log::warn!("window ending at {:.3} s took {compute_ms:.2} ms", sample.window_end_t);
        }
        let event = DecisionEvent {
            t: sample.window_end_t,
            p_mean: decision.mean,
            decision: decision.decision,
            compute_ms,
            deadline_miss,
            filter_lag_ms: self.filter_lag_ms(),
        };
        self.log.push(LogEntry::Decision(event.clone()));
        Ok(event)
    }
}

/// Per-window compute-time statistics, milliseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComputeStats {
    pub windows: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub deadline_misses: usize,
}

/// Nearest-rank percentiles over the events' compute times.
pub fn compute_stats<'a>(events: impl IntoIterator<Item = &'a DecisionEvent>) -> ComputeStats {
    let events: Vec<&DecisionEvent> = events.into_iter().collect();
    if events.is_empty() {
        return ComputeStats::default();
    }
    let mut times: Vec<f64> = events.iter().map(|e| e.compute_ms).collect();
    times.sort_by(f64::total_cmp);
    let rank = |q: f64| times[((q * times.len() as f64).ceil() as usize).clamp(1, times.len()) - 1];
    ComputeStats {
        windows: times.len(),
        mean_ms: times.iter().sum::<f64>() / times.len() as f64,
        p50_ms: rank(0.5),
        p99_ms: rank(0.99),
        max_ms: times[times.len() - 1],
        deadline_misses: events.iter().filter(|e| e.deadline_miss).count(),
    }
}
