//! Scenario grids and whole-corpus generation.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use tactislip_core::seed::{derive_seed, rng_from_seed};
use tactislip_core::{LabeledSequence, Movement};

use crate::generate::simulate;
use crate::noise::NoiseParams;
use crate::physics::PhysicsParams;
use crate::scenario::{RigScenario, SpeedLevel};
use crate::SimError;

/// Factorial grid of slip runs plus a set of stop runs.
///
/// Slip run `i` cycles movement fastest, then speed, then compression.
/// Direction, rotation sense and lead-in are drawn per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioGrid {
    pub movements: Vec<Movement>,
    pub compressions_mm: Vec<f64>,
    pub speeds: Vec<SpeedLevel>,
    pub slip_count: usize,
    pub stop_count: usize,
    pub lead_in_s: (f64, f64),
    pub halt_fraction: (f64, f64),
    pub seed: u64,
    pub physics: PhysicsParams,
    pub noise: NoiseParams,
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        Self {
            movements: Movement::ALL.to_vec(),
            compressions_mm: vec![1.0, 1.5, 2.0],
            speeds: SpeedLevel::PRESETS.to_vec(),
            slip_count: 200,
            stop_count: 28,
            lead_in_s: (0.05, 0.15),
            halt_fraction: (0.5, 0.9),
            seed: 0,
            physics: PhysicsParams::default(),
            noise: NoiseParams::default(),
        }
    }
}

impl ScenarioGrid {
    pub fn from_json_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::InvalidScenario(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| SimError::InvalidScenario(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.movements.is_empty() || self.compressions_mm.is_empty() || self.speeds.is_empty() {
            return Err(SimError::InvalidScenario("grid axes must be non-empty".into()));
        }
        let ordered = |(a, b): (f64, f64)| a <= b;
        if !ordered(self.lead_in_s) || !ordered(self.halt_fraction) {
            return Err(SimError::InvalidScenario("ranges must be ordered (low, high)".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.slip_count + self.stop_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scenario for run `index`: slip runs first, then stop runs.
    pub fn scenario(&self, index: usize) -> RigScenario {
        let (m, s) = (self.movements.len(), self.speeds.len());
        let cell = index % self.slip_count.max(1);
        let mut rng = rng_from_seed(derive_seed(self.seed, index as u64));
        let draw = |rng: &mut tactislip_core::seed::DetRng, (lo, hi): (f64, f64)| {
            if lo < hi {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        };
        let lead_in_s = draw(&mut rng, self.lead_in_s);
        let halt_fraction = draw(&mut rng, self.halt_fraction);
        RigScenario {
            movement: self.movements[cell % m],
            speed: self.speeds[(cell / m) % s],
            compression_mm: self.compressions_mm[(cell / (m * s)) % self.compressions_mm.len()],
            direction_rad: rng.random_range(0.0..std::f64::consts::TAU),
            rotation_sign: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            stop_event: index >= self.slip_count,
            lead_in_s,
            halt_fraction,
            physics: self.physics.clone(),
            noise: self.noise.clone(),
            seed: rng.random(),
            ..Default::default()
        }
    }

    pub fn run_id(&self, index: usize) -> String {
        if index < self.slip_count {
            format!("slip-{index:04}")
        } else {
            format!("stop-{:04}", index - self.slip_count)
        }
    }

    /// Inverse of [`ScenarioGrid::run_id`]. Anything after the four digits
    /// (such as a suffix added by augmentation) is ignored.
    pub fn run_index(&self, id: &str) -> Option<usize> {
        let (kind, rest) = id.split_once('-')?;
        let n: usize = rest.get(..4)?.parse().ok()?;
        let index = match kind {
            "slip" if n < self.slip_count => n,
            "stop" if n < self.stop_count => self.slip_count + n,
            _ => return None,
        };
        Some(index)
    }
}

/// Simulates every run of the grid, in order.
pub fn generate_dataset(grid: &ScenarioGrid) -> Result<Vec<LabeledSequence>, SimError> {
    grid.validate()?;
    (0..grid.len())
        .map(|i| {
            let mut item = simulate(&grid.scenario(i))?.labeled;
            item.sequence.meta.id = Some(grid.run_id(i));
            Ok(item)
        })
        .collect()
}
