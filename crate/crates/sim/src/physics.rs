//! Spring-slider contact model for the nine pillars.
//!
//! Each pillar is a tangential spring of stiffness `k` between its base
//! (the anchor, carried by the rig) and its tip, which touches a fixed
//! surface. While stuck the tip stays put and the force is `k` times the
//! deflection. Once the force would exceed `mu_s · N` the tip slides, and
//! the force magnitude drops to `mu_k · N`. The pillar sticks again when
//! the anchor stops pulling the tip along.

use serde::{Deserialize, Serialize};
use tactislip_core::frame::{pillar_grid_position, PILLAR_COUNT};

use crate::SimError;

/// Normal-force pattern, relative to the tallest (center) pillar: corners
/// lowest, edges in between. All entries are distinct so onsets spread out.
pub const HEIGHT_PATTERN: [f64; PILLAR_COUNT] = [0.50, 0.74, 0.56, 0.80, 1.00, 0.86, 0.62, 0.92, 0.68];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    /// Tangential stiffness, N/mm.
    pub stiffness_n_per_mm: f64,
    pub mu_static: f64,
    pub mu_kinetic: f64,
    /// Center-pillar normal force per mm of compression, N/mm.
    pub normal_gain_n_per_mm: f64,
    /// Relative per-pillar normal-force jitter, drawn once per sequence.
    pub normal_jitter: f64,
    /// Pillar spacing, mm.
    pub pitch_mm: f64,
    /// Tip sliding speed below which a pillar sticks again, mm/s.
    pub restick_deadband_mm_s: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            stiffness_n_per_mm: 0.8,
            mu_static: 1.2,
            mu_kinetic: 0.8,
            normal_gain_n_per_mm: 1.5,
            normal_jitter: 0.05,
            pitch_mm: 4.0,
            restick_deadband_mm_s: 1e-6,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.stiffness_n_per_mm > 0.0) {
            return Err(SimError::InvalidScenario("stiffness must be positive".into()));
        }
        if !(self.mu_kinetic > 0.0 && self.mu_kinetic < self.mu_static) {
            return Err(SimError::InvalidScenario(format!(
                "need 0 < mu_k < mu_s, got mu_k = {}, mu_s = {}",
                self.mu_kinetic, self.mu_static
            )));
        }
        if !(self.normal_gain_n_per_mm >= 0.0 && self.pitch_mm > 0.0) {
            return Err(SimError::InvalidScenario("normal gain and pitch must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.normal_jitter) {
            return Err(SimError::InvalidScenario("normal jitter must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pillar {
    pub stiffness: f64,
    pub normal_force: f64,
    pub mu_static: f64,
    pub mu_kinetic: f64,
    /// Rest position of the pillar base relative to the sensor center, mm.
    pub position: [f64; 2],
}

impl Pillar {
    pub fn static_limit(&self) -> f64 {
        self.mu_static * self.normal_force
    }

    pub fn kinetic_limit(&self) -> f64 {
        self.mu_kinetic * self.normal_force
    }
}

/// Builds the nine pillars for a compression level. `jitter[p]` in
/// `[-1, 1]` perturbs each normal force by `normal_jitter · jitter[p]`.
pub fn build_pillars(params: &PhysicsParams, compression_mm: f64, jitter: &[f64; PILLAR_COUNT]) -> [Pillar; PILLAR_COUNT] {
    let n_max = params.normal_gain_n_per_mm * compression_mm;
    std::array::from_fn(|p| {
        let (col, row) = pillar_grid_position(p);
        Pillar {
            stiffness: params.stiffness_n_per_mm,
            normal_force: n_max * HEIGHT_PATTERN[p] * (1.0 + params.normal_jitter * jitter[p]),
            mu_static: params.mu_static,
            mu_kinetic: params.mu_kinetic,
            position: [col * params.pitch_mm, row * params.pitch_mm],
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactState {
    Stick,
    Slip,
}

/// Per-pillar dynamic state; positions are displacements from rest, mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PillarState {
    pub anchor: [f64; 2],
    pub tip: [f64; 2],
    pub state: ContactState,
    /// Tip speed relative to the surface over the last step, mm/s.
    pub tip_speed: f64,
}

impl PillarState {
    pub fn at_rest() -> Self {
        Self { anchor: [0.0; 2], tip: [0.0; 2], state: ContactState::Stick, tip_speed: 0.0 }
    }

    pub fn deflection(&self) -> [f64; 2] {
        [self.anchor[0] - self.tip[0], self.anchor[1] - self.tip[1]]
    }
}

/// Tangential force exerted by a pillar, N.
pub fn tangential_force(pillar: &Pillar, state: &PillarState) -> [f64; 2] {
    let d = state.deflection();
    [pillar.stiffness * d[0], pillar.stiffness * d[1]]
}

/// Moves one pillar's anchor to `anchor` and resolves stick/slip over a
/// step of `dt` seconds.
pub fn step_pillar(pillar: &Pillar, state: &PillarState, anchor: [f64; 2], dt: f64, deadband_mm_s: f64) -> PillarState {
    let candidate = [anchor[0] - state.tip[0], anchor[1] - state.tip[1]];
    let stretch = candidate[0].hypot(candidate[1]);
    let k = pillar.stiffness;
    let slide_to = |radius: f64| -> PillarState {
        // tip trails the anchor along the candidate deflection direction
        let scale = radius / stretch;
        let tip = [anchor[0] - candidate[0] * scale, anchor[1] - candidate[1] * scale];
        let moved = (tip[0] - state.tip[0]).hypot(tip[1] - state.tip[1]);
        PillarState { anchor, tip, state: ContactState::Slip, tip_speed: moved / dt }
    };
    let stuck = PillarState { anchor, tip: state.tip, state: ContactState::Stick, tip_speed: 0.0 };
    match state.state {
        ContactState::Stick if k * stretch > pillar.static_limit() => slide_to(pillar.kinetic_limit() / k),
        ContactState::Stick => stuck,
        ContactState::Slip => {
            let radius = pillar.kinetic_limit() / k;
            if stretch - radius > deadband_mm_s * dt {
                slide_to(radius)
            } else {
                stuck
            }
        }
    }
}

/// Anchor displacement of pillar `position` for a rig translation `shift`
/// (mm) and a rotation `angle` (rad) about the sensor center.
pub fn anchor_displacement(position: [f64; 2], shift: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    let rotated = [c * position[0] - s * position[1], s * position[0] + c * position[1]];
    [rotated[0] - position[0] + shift[0], rotated[1] - position[1] + shift[1]]
}
