//! Sensor noise and sporadic glitches.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use tactislip_core::frame::{AXES, PILLAR_COUNT, SAMPLE_PERIOD_S};
use tactislip_core::TactileSequence;

use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// Additive Gaussian noise on every channel, N.
    pub sigma_n: f64,
    /// Expected glitches per second of recording.
    pub glitch_rate_hz: f64,
    /// Spike height, N.
    pub glitch_magnitude_n: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { sigma_n: 0.002, glitch_rate_hz: 0.5, glitch_magnitude_n: 0.5 }
    }
}

impl NoiseParams {
    pub fn none() -> Self {
        Self { sigma_n: 0.0, glitch_rate_hz: 0.0, glitch_magnitude_n: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sigma_n >= 0.0 && self.glitch_rate_hz >= 0.0 && self.glitch_magnitude_n >= 0.0) {
            return Err(SimError::InvalidScenario("noise parameters must be non-negative".into()));
        }
        if self.glitch_rate_hz * SAMPLE_PERIOD_S > 1.0 {
            return Err(SimError::InvalidScenario("glitch rate exceeds one per sample".into()));
        }
        Ok(())
    }
}

/// Adds Gaussian noise to all channels and single-sample spikes of
/// `±glitch_magnitude` on one random channel. Glitches arrive as a
/// Bernoulli process with probability `rate · dt` per frame, the discrete
/// form of a Poisson process. Returns the number of glitches injected.
pub fn inject_noise_glitches<R: Rng>(seq: &mut TactileSequence, params: &NoiseParams, rng: &mut R) -> Result<usize, SimError> {
    params.validate()?;
    let normal = Normal::new(0.0, params.sigma_n).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
    let p_glitch = params.glitch_rate_hz * SAMPLE_PERIOD_S;
    let mut glitches = 0;
    for frame in &mut seq.frames {
        if params.sigma_n > 0.0 {
            for v in frame.forces.iter_mut().flatten() {
                *v += normal.sample(rng);
            }
        }
        if p_glitch > 0.0 && rng.random_bool(p_glitch) {
            let pillar = rng.random_range(0..PILLAR_COUNT);
            let axis = rng.random_range(0..AXES);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            frame.forces[pillar][axis] += sign * params.glitch_magnitude_n;
            glitches += 1;
        }
    }
    Ok(glitches)
}
