//! Streaming inference: raw 1 kHz frames in, one ensemble decision per
//! 40 filtered frames out, each stamped with its compute time.

pub mod session;
pub mod stream;

pub use session::{
    compute_stats, Clock, ComputeStats, DecisionEvent, DetectorSession, ErrorEvent, LogEntry, MonotonicClock, SessionOptions,
    DEADLINE_MS,
};
pub use stream::{parse_frame_line, run_file, run_lines, run_sequence, write_event, DecisionLog, Pace, SequenceLog};

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("frame at t = {t} s does not follow t = {previous} s")]
    OutOfOrder { t: f64, previous: f64 },
    #[error("frame at t = {t} s holds a non-finite value")]
    NonFiniteFrame { t: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Nn(#[from] tactislip_nn::NnError),
    #[error(transparent)]
    Core(#[from] tactislip_core::CoreError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = RuntimeError> = std::result::Result<T, E>;
