//! Feeding sessions from recorded datasets or from line-delimited input.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::mpsc::sync_channel;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tactislip_core::{load_dataset, PillarFrame, TactileSequence};

use crate::session::{compute_stats, Clock, ComputeStats, DecisionEvent, DetectorSession, LogEntry};
use crate::{Result, RuntimeError};

/// Replay speed for recorded data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pace {
    /// As fast as possible.
    Accelerated,
    /// Frame timestamps honored, scaled by `speedup`.
    RealTime { speedup: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceLog {
    pub id: Option<String>,
    pub events: Vec<DecisionEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub sequences: Vec<SequenceLog>,
    pub stats: ComputeStats,
}

/// Streams one recorded sequence from a fresh state and flushes the
/// filter at the end.
pub fn run_sequence<C: Clock>(session: &mut DetectorSession<C>, seq: &TactileSequence, pace: Pace) -> Result<Vec<DecisionEvent>> {
    session.reset();
    let mut events = Vec::new();
    let start = Instant::now();
    let t0 = seq.frames.first().map_or(0.0, |f| f.t);
    for frame in &seq.frames {
        if let Pace::RealTime { speedup } = pace {
            let due = Duration::from_secs_f64(((frame.t - t0) / speedup).max(0.0));
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        events.extend(session.push_frame(*frame)?);
    }
    events.extend(session.finish()?);
    Ok(events)
}

/// Streams every sequence of a dataset file, each from a fresh state.
pub fn run_file<C: Clock>(session: &mut DetectorSession<C>, path: impl AsRef<Path>, pace: Pace) -> Result<DecisionLog> {
    let dataset = load_dataset(path)?;
    let mut sequences = Vec::with_capacity(dataset.len());
    for seq in &dataset {
        let events = run_sequence(session, seq, pace)?;
        sequences.push(SequenceLog { id: seq.meta.id.clone(), events });
    }
    let stats = compute_stats(sequences.iter().flat_map(|s| &s.events));
    Ok(DecisionLog { sequences, stats })
}

/// Parses `[t, fx0, fy0, fz0, ..., fz8]`.
pub fn parse_frame_line(text: &str, line: usize) -> Result<PillarFrame> {
    let row: Vec<f64> = serde_json::from_str(text).map_err(|e| RuntimeError::Parse { line, message: e.to_string() })?;
    PillarFrame::from_row(&row).ok_or_else(|| RuntimeError::Parse { line, message: format!("expected 28 numbers, got {}", row.len()) })
}

pub fn write_event<W: Write>(out: &mut W, entry: &LogEntry) -> Result<()> {
    serde_json::to_writer(&mut *out, entry)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Live mode: a reader thread hands lines to the detector through a
/// bounded queue of `capacity` lines; when it fills, the reader blocks, so
/// no frame is dropped. Every decision and every rejected line is written
/// to `out` as it happens. Returns the compute statistics.
pub fn run_lines<C: Clock, R: BufRead + Send, W: Write>(
    session: &mut DetectorSession<C>,
    input: R,
    out: &mut W,
    capacity: usize,
) -> Result<ComputeStats> {
    let (tx, rx) = sync_channel::<std::io::Result<(usize, String)>>(capacity.max(1));
    let mut decisions = Vec::new();
    std::thread::scope(|scope| -> Result<()> {
        scope.spawn(move || {
            for (i, line) in input.lines().enumerate() {
                let stop = line.is_err();
                if tx.send(line.map(|l| (i + 1, l))).is_err() || stop {
                    break;
                }
            }
        });
        for item in rx {
            let (line, text) = item?;
            if text.trim().is_empty() {
                continue;
            }
            let before = session.log().len();
            match parse_frame_line(&text, line) {
                Ok(frame) => {
                    if let Ok(Some(event)) = session.push_frame(frame) {
                        decisions.push(event);
                    }
                }
                Err(err) => session.log_error(None, &err),
            }
            for entry in &session.log()[before..] {
                write_event(out, entry)?;
            }
        }
        Ok(())
    })?;
    let before = session.log().len();
    decisions.extend(session.finish()?);
    for entry in &session.log()[before..] {
        write_event(out, entry)?;
    }
    out.flush()?;
    Ok(compute_stats(&decisions))
}
