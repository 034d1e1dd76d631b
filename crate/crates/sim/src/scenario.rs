//! Rig scenarios and drive motion profiles.

use serde::{Deserialize, Serialize};
use tactislip_core::Movement;

use crate::noise::NoiseParams;
use crate::physics::PhysicsParams;
use crate::SimError;

/// Drive speed and acceleration. Translation in mm/s and mm/s², rotation
/// in deg/s and deg/s². An infinite acceleration starts at full speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedLevel {
    Low,
    Medium,
    High,
    Custom { speed_mm_s: f64, accel_mm_s2: f64, speed_deg_s: f64, accel_deg_s2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub speed_mm_s: f64,
    pub accel_mm_s2: f64,
    pub speed_deg_s: f64,
    pub accel_deg_s2: f64,
}

impl SpeedLevel {
    pub const PRESETS: [SpeedLevel; 3] = [SpeedLevel::Low, SpeedLevel::Medium, SpeedLevel::High];

    pub fn kinematics(self) -> Kinematics {
        let (speed_mm_s, accel_mm_s2, speed_deg_s, accel_deg_s2) = match self {
            SpeedLevel::Low => (4.0, 10.0, 30.0, 60.0),
            SpeedLevel::Medium => (10.0, 50.0, 60.0, 200.0),
            SpeedLevel::High => (40.0, 100.0, 120.0, 500.0),
            SpeedLevel::Custom { speed_mm_s, accel_mm_s2, speed_deg_s, accel_deg_s2 } => {
                (speed_mm_s, accel_mm_s2, speed_deg_s, accel_deg_s2)
            }
        };
        Kinematics { speed_mm_s, accel_mm_s2, speed_deg_s, accel_deg_s2 }
    }

    /// Speed recorded in sequence metadata: deg/s for pure rotation,
    /// mm/s otherwise.
    pub fn nominal_speed(self, movement: Movement) -> f64 {
        let k = self.kinematics();
        if movement == Movement::Rotation {
            k.speed_deg_s
        } else {
            k.speed_mm_s
        }
    }
}

/// Piecewise constant-acceleration motion along one coordinate, starting
/// at rest at position 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionProfile {
    /// `(start time, start position, start velocity, acceleration)`.
    segments: Vec<(f64, f64, f64, f64)>,
}

impl MotionProfile {
    pub fn idle() -> Self {
        Self { segments: vec![(0.0, 0.0, 0.0, 0.0)] }
    }

    /// Rest until `start`, accelerate at `accel` to `speed`, then cruise.
    pub fn ramp(start: f64, speed: f64, accel: f64) -> Self {
        let mut segments = vec![(0.0, 0.0, 0.0, 0.0)];
        if speed == 0.0 {
            return Self { segments };
        }
        if accel.is_infinite() {
            segments.push((start, 0.0, speed, 0.0));
        } else {
            let t_ramp = speed / accel;
            segments.push((start, 0.0, 0.0, accel));
            segments.push((start + t_ramp, 0.5 * accel * t_ramp * t_ramp, speed, 0.0));
        }
        Self { segments }
    }

    /// Same profile, decelerating at `decel` from time `halt` until rest.
    pub fn with_halt(&self, halt: f64, decel: f64) -> Self {
        let mut segments: Vec<_> = self.segments.iter().copied().filter(|s| s.0 < halt).collect();
        let x = self.position(halt);
        let v = self.velocity(halt);
        if v > 0.0 {
            segments.push((halt, x, v, -decel));
            let t_stop = v / decel;
            segments.push((halt + t_stop, x + 0.5 * v * t_stop, 0.0, 0.0));
        }
        Self { segments }
    }

    fn segment(&self, t: f64) -> (f64, f64, f64, f64) {
        let idx = self.segments.partition_point(|s| s.0 <= t);
        self.segments[idx.saturating_sub(1)]
    }

    pub fn position(&self, t: f64) -> f64 {
        let (t0, x0, v0, a) = self.segment(t);
        let dt = (t - t0).max(0.0);
        x0 + v0 * dt + 0.5 * a * dt * dt
    }

    pub fn velocity(&self, t: f64) -> f64 {
        let (t0, _, v0, a) = self.segment(t);
        v0 + a * (t - t0).max(0.0)
    }

    /// Time after which the profile is at rest for good, if it stops.
    pub fn rest_time(&self) -> Option<f64> {
        let &(t0, _, v0, a) = self.segments.last()?;
        (v0 == 0.0 && a == 0.0).then_some(t0)
    }
}

/// One rig run: the sensor is pressed onto a flat surface and dragged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigScenario {
    pub movement: Movement,
    pub compression_mm: f64,
    pub speed: SpeedLevel,
    /// Translation heading, radians.
    pub direction_rad: f64,
    /// +1 counter-clockwise, -1 clockwise.
    pub rotation_sign: f64,
    /// Halt before any pillar slips.
    pub stop_event: bool,
    /// Fixed length in seconds; when absent a slip run ends
    /// `post_slip_s` after every considered pillar has slipped.
    pub duration_s: Option<f64>,
    /// Stationary contact before the drive starts, s.
    pub lead_in_s: f64,
    pub post_slip_s: f64,
    /// Upper bound on automatic slip-run length, s.
    pub max_duration_s: f64,
    /// Stop runs: peak fraction of the static limit reached at rest.
    pub halt_fraction: f64,
    /// Stop runs: rest period after the halt, s.
    pub hold_s: f64,
    pub physics: PhysicsParams,
    pub noise: NoiseParams,
    pub seed: u64,
}

impl Default for RigScenario {
    fn default() -> Self {
        Self {
            movement: Movement::Translation,
            compression_mm: 1.5,
            speed: SpeedLevel::Medium,
            direction_rad: 0.0,
            rotation_sign: 1.0,
            stop_event: false,
            duration_s: None,
            lead_in_s: 0.1,
            post_slip_s: 0.3,
            max_duration_s: 5.0,
            halt_fraction: 0.7,
            hold_s: 0.3,
            physics: PhysicsParams::default(),
            noise: NoiseParams::default(),
            seed: 0,
        }
    }
}

impl RigScenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.physics.validate()?;
        self.noise.validate()?;
        let k = self.speed.kinematics();
        let speed = if self.movement == Movement::Rotation { k.speed_deg_s } else { k.speed_mm_s };
        if !(speed > 0.0) {
            return Err(SimError::InvalidScenario(format!("drive speed must be positive, got {speed}")));
        }
        if !(k.accel_mm_s2 > 0.0 && k.accel_deg_s2 > 0.0) {
            return Err(SimError::InvalidScenario("drive acceleration must be positive".into()));
        }
        if let Some(d) = self.duration_s {
            if !(d >= 0.08) {
                return Err(SimError::InvalidScenario(format!("duration must be at least 0.08 s, got {d}")));
            }
        }
        if !(self.compression_mm > 0.0) {
            return Err(SimError::InvalidScenario("compression must be positive".into()));
        }
        if !(self.halt_fraction > 0.0 && self.halt_fraction < 1.0) {
            return Err(SimError::InvalidScenario("halt fraction must lie in (0, 1)".into()));
        }
        if !(self.lead_in_s >= 0.0 && self.post_slip_s >= 0.0 && self.hold_s >= 0.0) {
            return Err(SimError::InvalidScenario("phase durations must be non-negative".into()));
        }
        Ok(())
    }

    /// Translation and rotation profiles of the undisturbed drive.
    pub fn profiles(&self) -> (MotionProfile, MotionProfile) {
        let k = self.speed.kinematics();
        let translation = if self.movement.has_translation() {
            MotionProfile::ramp(self.lead_in_s, k.speed_mm_s, k.accel_mm_s2)
        } else {
            MotionProfile::idle()
        };
        let rotation = if self.movement.has_rotation() {
            MotionProfile::ramp(self.lead_in_s, k.speed_deg_s, k.accel_deg_s2)
        } else {
            MotionProfile::idle()
        };
        (translation, rotation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_positions() {
        let p = MotionProfile::ramp(0.1, 10.0, 50.0);
        assert_eq!(p.position(0.05), 0.0);
        assert!((p.position(0.3) - 1.0).abs() < 1e-12);
        assert!((p.position(0.4) - 2.0).abs() < 1e-12);
        assert!((p.velocity(0.5) - 10.0).abs() < 1e-12);
        assert_eq!(p.rest_time(), None);
    }

    #[test]
    fn halt_comes_to_rest() {
        let p = MotionProfile::ramp(0.0, 10.0, 50.0).with_halt(0.5, 1000.0);
        let rest = p.rest_time().unwrap();
        assert!((rest - 0.51).abs() < 1e-12);
        let x = p.position(rest);
        assert!((p.position(1.0) - x).abs() < 1e-12);
        assert!((x - (4.0 + 0.05)).abs() < 1e-12);
    }

    #[test]
    fn instant_start() {
        let p = MotionProfile::ramp(0.0, 1.0, f64::INFINITY);
        assert!((p.position(2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scenario_validation() {
        assert!(RigScenario::default().validate().is_ok());
        let bad = RigScenario { duration_s: Some(0.05), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RigScenario {
            speed: SpeedLevel::Custom { speed_mm_s: 0.0, accel_mm_s2: 1.0, speed_deg_s: 1.0, accel_deg_s2: 1.0 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
