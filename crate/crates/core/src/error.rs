use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sequence too short: {len} frames, need at least {min}")]
    SequenceTooShort { len: usize, min: usize },
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: frame {frame} has {found} values, expected {expected}")]
    FrameArity { line: usize, frame: usize, found: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
