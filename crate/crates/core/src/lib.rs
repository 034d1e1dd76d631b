//! Core data model and signal chain for tactile incipient-slip detection.
//!
//! A [`TactileSequence`] holds 1 kHz frames of nine 3-axis pillar forces.
//! The chain that feeds the classifier is: [`median_filter`] →
//! [`segment_windows`] → [`window_labels`]. Ground-truth labels come from
//! [`incipient_interval`], and [`augment`] expands a labeled corpus.

pub mod annotation;
pub mod augment;
pub mod dataset;
pub mod error;
pub mod filter;
pub mod frame;
pub mod prepare;
pub mod seed;
pub mod window;

pub use annotation::{
    incipient_interval, incipient_interval_with_contact, label_at, pillar_slip_from_tip_motion, window_labels, Onsets,
    SequenceClass, SlipAnnotation, TipMotionThreshold,
};
pub use augment::{augment_dataset, AugmentationConfig, Provenance, TransformStep};
pub use dataset::{load_dataset, load_labeled, save_dataset, save_labeled, LabeledSequence};
pub use error::{CoreError, Result};
pub use filter::{median_filter, MedianMode, StreamingMedian, DEFAULT_MEDIAN_WINDOW};
pub use frame::{Movement, PillarFrame, SequenceMeta, TactileSequence, CENTER_PILLAR, PILLAR_COUNT};
pub use prepare::{prepare, prepare_all, prepare_unlabeled, prepare_with, PreparedSequence};
pub use window::{segment_windows, select_xy_features, WindowLabel, WindowedSample, WINDOW_FEATURES, WINDOW_LEN};
