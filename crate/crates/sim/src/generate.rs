//! Slip and stop runs of the simulated rig.

use rand::Rng;
use tactislip_core::annotation::considered_pillars;
use tactislip_core::frame::{grid_time, PillarFrame, SequenceMeta, PILLAR_COUNT, SAMPLE_PERIOD_S};
use tactislip_core::seed::rng_from_seed;
use tactislip_core::{incipient_interval, LabeledSequence, SlipAnnotation, TactileSequence};

use crate::noise::inject_noise_glitches;
use crate::physics::{build_pillars, step_pillar, tangential_force, ContactState, Pillar, PillarState};
use crate::scenario::{MotionProfile, RigScenario};
use crate::SimError;

/// Time the drive takes to come to rest in a stop run, s.
pub const HALT_DURATION_S: f64 = 0.02;

/// Noise-free ground truth recorded alongside a simulated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub pillars: [Pillar; PILLAR_COUNT],
    /// Frames before noise injection.
    pub clean: Vec<PillarFrame>,
    pub states: Vec<[PillarState; PILLAR_COUNT]>,
    pub glitches: usize,
}

impl SimTrace {
    pub fn slip_flags(&self, frame: usize) -> [bool; PILLAR_COUNT] {
        self.states[frame].map(|s| s.state == ContactState::Slip)
    }

    /// Per-pillar tip speed series in mm/s.
    pub fn tip_speed_series(&self) -> [Vec<f64>; PILLAR_COUNT] {
        std::array::from_fn(|p| self.states.iter().map(|s| s[p].tip_speed).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub labeled: LabeledSequence,
    pub trace: SimTrace,
}

/// Drive kinematics shared by every step of a run.
struct Drive {
    translation: MotionProfile,
    rotation: MotionProfile,
    heading: [f64; 2],
    rotation_sign: f64,
}

impl Drive {
    fn anchors(&self, pillars: &[Pillar; PILLAR_COUNT], t: f64) -> [[f64; 2]; PILLAR_COUNT] {
        let s = self.translation.position(t);
        let angle = self.rotation_sign * self.rotation.position(t).to_radians();
        let (sin, cos) = angle.sin_cos();
        pillars.map(|p| {
            let [x, y] = p.position;
            [cos * x - sin * y - x + s * self.heading[0], sin * x + cos * y - y + s * self.heading[1]]
        })
    }
}

enum Stopping {
    /// Run a fixed number of frames.
    Frames(usize),
    /// Run until every considered pillar has slipped, plus a tail.
    AfterAllSlip { tail: usize, cap: usize, considered: Vec<usize> },
}

fn run(pillars: &[Pillar; PILLAR_COUNT], drive: &Drive, stopping: Stopping, deadband: f64) -> Result<Vec<[PillarState; PILLAR_COUNT]>, SimError> {
    let mut states = Vec::new();
    let mut current = [PillarState::at_rest(); PILLAR_COUNT];
    let mut ever_slipped = [false; PILLAR_COUNT];
    let mut stop_at: Option<usize> = None;
    for k in 0.. {
        let limit = match &stopping {
            Stopping::Frames(n) => *n,
            Stopping::AfterAllSlip { cap, .. } => stop_at.map_or(*cap, |s| s.min(*cap)),
        };
        if k >= limit {
            break;
        }
        let t = grid_time(0.0, k);
        let anchors = drive.anchors(pillars, t);
        for p in 0..PILLAR_COUNT {
            current[p] = step_pillar(&pillars[p], &current[p], anchors[p], SAMPLE_PERIOD_S, deadband);
            if !(current[p].tip[0].is_finite() && current[p].tip[1].is_finite()) {
                return Err(SimError::NonFinite { frame: k, pillar: p });
            }
            ever_slipped[p] |= current[p].state == ContactState::Slip;
        }
        states.push(current);
        if let Stopping::AfterAllSlip { tail, considered, .. } = &stopping {
            if stop_at.is_none() && considered.iter().all(|&p| ever_slipped[p]) {
                stop_at = Some(k + 1 + tail);
            }
        }
    }
    Ok(states)
}

fn frames_from_states(pillars: &[Pillar; PILLAR_COUNT], states: &[[PillarState; PILLAR_COUNT]]) -> Vec<PillarFrame> {
    states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut f = PillarFrame::zeros(grid_time(0.0, k));
            for p in 0..PILLAR_COUNT {
                let [fx, fy] = tangential_force(&pillars[p], &s[p]);
                f.forces[p] = [fx, fy, pillars[p].normal_force];
            }
            f
        })
        .collect()
}

fn onsets_from_states(states: &[[PillarState; PILLAR_COUNT]]) -> [Option<f64>; PILLAR_COUNT] {
    std::array::from_fn(|p| {
        states
            .iter()
            .position(|s| s[p].state == ContactState::Slip)
            .map(|k| grid_time(0.0, k))
    })
}

fn frame_count(seconds: f64) -> usize {
    (seconds / SAMPLE_PERIOD_S).round() as usize
}

/// Largest ratio of final stuck force to static limit if the drive halts
/// at `halt`.
fn rest_load_ratio(pillars: &[Pillar; PILLAR_COUNT], drive: &Drive, halt: f64) -> (f64, Drive) {
    let halted = |p: &MotionProfile| {
        let v = p.velocity(halt);
        if v > 0.0 {
            p.with_halt(halt, v / HALT_DURATION_S)
        } else {
            p.clone()
        }
    };
    let stopped = Drive {
        translation: halted(&drive.translation),
        rotation: halted(&drive.rotation),
        heading: drive.heading,
        rotation_sign: drive.rotation_sign,
    };
    let anchors = stopped.anchors(pillars, halt + HALT_DURATION_S + 1.0);
    let ratio = pillars
        .iter()
        .zip(anchors)
        .map(|(p, a)| p.stiffness * a[0].hypot(a[1]) / p.static_limit())
        .fold(0.0, f64::max);
    (ratio, stopped)
}

/// Runs a scenario and returns the noisy sequence, its annotation and the
/// clean trace.
pub fn simulate(scenario: &RigScenario) -> Result<SimOutput, SimError> {
    scenario.validate()?;
    let mut rng = rng_from_seed(scenario.seed);
    let jitter: [f64; PILLAR_COUNT] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
    let pillars = build_pillars(&scenario.physics, scenario.compression_mm, &jitter);
    let (translation, rotation) = scenario.profiles();
    let drive = Drive {
        translation,
        rotation,
        heading: [scenario.direction_rad.cos(), scenario.direction_rad.sin()],
        rotation_sign: scenario.rotation_sign.signum(),
    };
    let deadband = scenario.physics.restick_deadband_mm_s;

    let states = if scenario.stop_event {
        let (lo, hi) = bracket_halt(&pillars, &drive, scenario)?;
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if rest_load_ratio(&pillars, &drive, mid).0 <= scenario.halt_fraction {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (_, stopped) = rest_load_ratio(&pillars, &drive, lo);
        let rest = lo + HALT_DURATION_S;
        let n = match scenario.duration_s {
            Some(d) => frame_count(d),
            None => frame_count(rest + scenario.hold_s) + 1,
        };
        let states = run(&pillars, &stopped, Stopping::Frames(n), deadband)?;
        if states.iter().flatten().any(|s| s.state == ContactState::Slip) {
            return Err(SimError::InvalidScenario("stop run slipped before the halt".into()));
        }
        states
    } else {
        let stopping = match scenario.duration_s {
            Some(d) => Stopping::Frames(frame_count(d)),
            None => Stopping::AfterAllSlip {
                tail: frame_count(scenario.post_slip_s),
                cap: frame_count(scenario.max_duration_s),
                considered: considered_pillars(scenario.movement).collect(),
            },
        };
        run(&pillars, &drive, stopping, deadband)?
    };

    let clean = frames_from_states(&pillars, &states);
    let onsets = onsets_from_states(&states);
    let annotation = if scenario.stop_event { SlipAnnotation::stop() } else { incipient_interval(&onsets, scenario.movement) };
    let meta = SequenceMeta::new(scenario.movement, scenario.compression_mm, scenario.speed.nominal_speed(scenario.movement));
    let mut sequence = TactileSequence::new(meta, clean.clone());
    let glitches = inject_noise_glitches(&mut sequence, &scenario.noise, &mut rng)?;
    Ok(SimOutput {
        labeled: LabeledSequence { sequence, annotation },
        trace: SimTrace { pillars, clean, states, glitches },
    })
}

fn bracket_halt(pillars: &[Pillar; PILLAR_COUNT], drive: &Drive, scenario: &RigScenario) -> Result<(f64, f64), SimError> {
    let lo = scenario.lead_in_s;
    let mut hi = lo + 0.05;
    while rest_load_ratio(pillars, drive, hi).0 <= scenario.halt_fraction {
        hi += 0.25;
        if hi > lo + scenario.max_duration_s {
            return Err(SimError::InvalidScenario("drive never loads the pillars".into()));
        }
    }
    Ok((lo, hi))
}

pub fn generate_slip_sequence(scenario: &RigScenario) -> Result<(TactileSequence, SlipAnnotation), SimError> {
    let out = simulate(&RigScenario { stop_event: false, ..scenario.clone() })?;
    Ok((out.labeled.sequence, out.labeled.annotation))
}

pub fn generate_stop_sequence(scenario: &RigScenario) -> Result<(TactileSequence, SlipAnnotation), SimError> {
    let out = simulate(&RigScenario { stop_event: true, ..scenario.clone() })?;
    Ok((out.labeled.sequence, out.labeled.annotation))
}
