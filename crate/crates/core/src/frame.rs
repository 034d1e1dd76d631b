//! Frame and sequence types.
//!
//! Pillars are indexed row-major over the 3×3 array:
//!
//! ```text
//!   0 1 2
//!   3 4 5
//!   6 7 8
//! ```
//!
//! Index 4 is the center pillar. Every module in the workspace uses this
//! layout.

use serde::{Deserialize, Serialize};

use crate::augment::Provenance;
use crate::error::CoreError;

pub const PILLAR_COUNT: usize = 9;
pub const CENTER_PILLAR: usize = 4;
/// Force axes per pillar: fx, fy, fz.
pub const AXES: usize = 3;
/// Values per serialized frame: timestamp plus 9 × 3 forces.
pub const FRAME_WIDTH: usize = 1 + PILLAR_COUNT * AXES;

pub const SAMPLE_RATE_HZ: f64 = 1000.0;
pub const SAMPLE_PERIOD_S: f64 = 1.0 / SAMPLE_RATE_HZ;
/// Allowed deviation of the frame spacing from the nominal period.
pub const SPACING_TOLERANCE_S: f64 = 1e-6;
/// Shortest valid sequence: two windows.
pub const MIN_SEQUENCE_FRAMES: usize = 80;

/// Grid coordinates (column, row) of a pillar, each in {-1, 0, 1}, with
/// the center pillar at the origin. Row 0 is +y.
pub fn pillar_grid_position(index: usize) -> (f64, f64) {
    assert!(index < PILLAR_COUNT, "pillar index out of range: {index}");
    let col = (index % 3) as f64 - 1.0;
    let row = (index / 3) as f64 - 1.0;
    (col, -row)
}

/// One 1 kHz sample: timestamp and a 3-axis force per pillar, in newtons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PillarFrame {
    pub t: f64,
    pub forces: [[f64; AXES]; PILLAR_COUNT],
}

impl PillarFrame {
    pub fn zeros(t: f64) -> Self {
        Self { t, forces: [[0.0; AXES]; PILLAR_COUNT] }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.forces.iter().flatten().all(|v| v.is_finite())
    }

    /// Flattened `[t, fx0, fy0, fz0, ..., fz8]` row.
    pub fn to_row(&self) -> [f64; FRAME_WIDTH] {
        let mut row = [0.0; FRAME_WIDTH];
        row[0] = self.t;
        for (p, f) in self.forces.iter().enumerate() {
            row[1 + p * AXES..1 + (p + 1) * AXES].copy_from_slice(f);
        }
        row
    }

    pub fn from_row(row: &[f64]) -> Option<Self> {
        if row.len() != FRAME_WIDTH {
            return None;
        }
        let mut frame = Self::zeros(row[0]);
        for (p, f) in frame.forces.iter_mut().enumerate() {
            f.copy_from_slice(&row[1 + p * AXES..1 + (p + 1) * AXES]);
        }
        Some(frame)
    }

    /// Tangential force magnitude of one pillar.
    pub fn tangential_norm(&self, pillar: usize) -> f64 {
        let [fx, fy, _] = self.forces[pillar];
        fx.hypot(fy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Movement {
    #[serde(rename = "translation")]
    Translation,
    #[serde(rename = "rotation")]
    Rotation,
    #[serde(rename = "translation+rotation")]
    TranslationRotation,
}

impl Movement {
    pub const ALL: [Movement; 3] =
        [Movement::Translation, Movement::Rotation, Movement::TranslationRotation];

    pub fn has_translation(self) -> bool {
        matches!(self, Movement::Translation | Movement::TranslationRotation)
    }

    pub fn has_rotation(self) -> bool {
        matches!(self, Movement::Rotation | Movement::TranslationRotation)
    }

    pub fn name(self) -> &'static str {
        match self {
            Movement::Translation => "translation",
            Movement::Rotation => "rotation",
            Movement::TranslationRotation => "translation+rotation",
        }
    }
}

impl std::str::FromStr for Movement {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Movement::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CoreError::InvalidParameter(format!("unknown movement `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub movement: Movement,
    pub compression_mm: f64,
    /// mm/s for translation, deg/s for pure rotation.
    pub drive_speed: f64,
    pub contact_mask: [bool; PILLAR_COUNT],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl SequenceMeta {
    pub fn new(movement: Movement, compression_mm: f64, drive_speed: f64) -> Self {
        Self {
            movement,
            compression_mm,
            drive_speed,
            contact_mask: [true; PILLAR_COUNT],
            id: None,
            provenance: None,
        }
    }

    pub fn contacted_count(&self) -> usize {
        self.contact_mask.iter().filter(|&&c| c).count()
    }
}

/// An ordered run of frames plus scenario metadata.
///
/// Construction is unchecked; call [`TactileSequence::validate`] to enforce
/// the sequence invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileSequence {
    pub meta: SequenceMeta,
    pub frames: Vec<PillarFrame>,
}

impl TactileSequence {
    pub fn new(meta: SequenceMeta, frames: Vec<PillarFrame>) -> Self {
        Self { meta, frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(|f| f.t)
    }

    /// Index of the first frame with `t >= time`, if any.
    pub fn index_at_or_after(&self, time: f64) -> Option<usize> {
        let idx = self.frames.partition_point(|f| f.t < time);
        (idx < self.frames.len()).then_some(idx)
    }

    /// Checks every invariant: length, finiteness, strictly increasing
    /// timestamps on the 1 ms grid, and at least one contacted pillar.
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.frames.len() < MIN_SEQUENCE_FRAMES {
            return Err(CoreError::SequenceTooShort {
                len: self.frames.len(),
                min: MIN_SEQUENCE_FRAMES,
            });
        }
        if self.meta.contacted_count() == 0 {
            return Err(CoreError::InvalidSequence("no contacted pillar".into()));
        }
        for (i, frame) in self.frames.iter().enumerate() {
            if !frame.is_finite() {
                return Err(CoreError::InvalidSequence(format!("frame {i} is not finite")));
            }
            if frame.t < 0.0 {
                return Err(CoreError::InvalidSequence(format!("frame {i} has negative time")));
            }
        }
        for (i, pair) in self.frames.windows(2).enumerate() {
            let dt = pair[1].t - pair[0].t;
            if (dt - SAMPLE_PERIOD_S).abs() > SPACING_TOLERANCE_S {
                return Err(CoreError::InvalidSequence(format!(
                    "frame spacing {dt:.9} s between frames {i} and {} is off the 1 ms grid",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Timestamp of frame `index` on a uniform 1 kHz grid starting at `t0`.
pub fn grid_time(t0: f64, index: usize) -> f64 {
    t0 + index as f64 * SAMPLE_PERIOD_S
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> TactileSequence {
        let frames = (0..n).map(|i| PillarFrame::zeros(grid_time(0.0, i))).collect();
        TactileSequence::new(SequenceMeta::new(Movement::Translation, 1.0, 8.0), frames)
    }

    #[test]
    fn row_round_trip() {
        let mut f = PillarFrame::zeros(0.25);
        f.forces[4] = [1.0, -2.0, 3.5];
        let row = f.to_row();
        assert_eq!(row[1 + 4 * 3], 1.0);
        assert_eq!(PillarFrame::from_row(&row), Some(f));
        assert_eq!(PillarFrame::from_row(&row[..27]), None);
    }

    #[test]
    fn layout_center_is_origin() {
        assert_eq!(pillar_grid_position(CENTER_PILLAR), (0.0, 0.0));
        assert_eq!(pillar_grid_position(0), (-1.0, 1.0));
        assert_eq!(pillar_grid_position(8), (1.0, -1.0));
    }

    #[test]
    fn validation_rules() {
        assert!(uniform(80).validate().is_ok());
        assert!(matches!(uniform(79).validate(), Err(CoreError::SequenceTooShort { .. })));

        let mut seq = uniform(100);
        seq.frames[50].t += 0.0005;
        assert!(seq.validate().is_err());

        let mut seq = uniform(100);
        seq.meta.contact_mask = [false; PILLAR_COUNT];
        assert!(seq.validate().is_err());

        let mut seq = uniform(100);
        seq.frames[3].forces[2][1] = f64::NAN;
        assert!(seq.validate().is_err());
    }

    #[test]
    fn movement_names_parse() {
        for m in Movement::ALL {
            assert_eq!(m.name().parse::<Movement>().unwrap(), m);
        }
        assert!("spin".parse::<Movement>().is_err());
    }
}
