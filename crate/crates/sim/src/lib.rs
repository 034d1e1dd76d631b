//! Simulated tactile rig producing labeled slip and stop sequences.
//!
//! Nine spring-slider pillars are dragged over a flat surface by a drive
//! that translates, rotates or does both. Ground-truth onsets come from the
//! noise-free contact states; noise and glitches are added afterwards.

pub mod corpus;
pub mod generate;
pub mod noise;
pub mod physics;
pub mod scenario;

pub use corpus::{generate_dataset, ScenarioGrid};
pub use generate::{generate_slip_sequence, generate_stop_sequence, simulate, SimOutput, SimTrace};
pub use noise::{inject_noise_glitches, NoiseParams};
pub use physics::PhysicsParams;
pub use scenario::{RigScenario, SpeedLevel};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("simulation diverged at frame {frame}, pillar {pillar}")]
    NonFinite { frame: usize, pillar: usize },
}
