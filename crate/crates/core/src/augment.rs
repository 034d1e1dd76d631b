//! Data augmentation: rotational symmetry and the domain-adaptation
//! remedies (velocity resampling, unloaded pillars, force scaling, pillar
//! permutation and pillar mixing).
//!
//! Transforms that can change which pillars slip, or when, recompute the
//! annotation from the remapped onsets. Rotation and scaling leave the
//! annotation untouched.

use std::f64::consts::TAU;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::annotation::{incipient_interval_with_contact, Onsets};
use crate::dataset::LabeledSequence;
use crate::error::{CoreError, Result};
use crate::frame::{grid_time, PillarFrame, SequenceMeta, TactileSequence, MIN_SEQUENCE_FRAMES, PILLAR_COUNT};
use crate::seed::{derive_seed2, rng_from_seed};

/// One applied transform with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TransformStep {
    Rotate { theta: f64 },
    Resample { keep_fraction: f64, kept: usize },
    ZeroPillars { pillars: Vec<usize>, sigma: f64 },
    Scale { factors: [f64; PILLAR_COUNT] },
    Permute { permutation: [usize; PILLAR_COUNT] },
    /// Dataset indices of the donor of each output pillar.
    Mix { donors: [usize; PILLAR_COUNT] },
}

/// How a derived sequence was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: usize,
    pub seed: u64,
    pub transforms: Vec<TransformStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub expansion_factor: usize,
    pub rotation: bool,
    pub resample: bool,
    pub resample_keep_fraction: (f64, f64),
    pub zero_pillars: bool,
    /// Inclusive range for the number of pillars replaced by noise.
    pub zero_pillar_count: (usize, usize),
    pub noise_sigma: f64,
    pub scale: bool,
    pub scale_range: (f64, f64),
    pub permute: bool,
    pub mix: bool,
    /// Donor sequences drawn for each mix, including the base sequence.
    pub mix_pool_size: usize,
    /// Probability of applying each enabled remedy to a derived sequence.
    pub remedy_probability: f64,
    pub rng_seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            expansion_factor: 5,
            rotation: true,
            resample: true,
            resample_keep_fraction: (0.6, 0.95),
            zero_pillars: true,
            zero_pillar_count: (1, 4),
            noise_sigma: 0.001,
            scale: true,
            scale_range: (0.2, 2.0),
            permute: true,
            mix: true,
            mix_pool_size: 4,
            remedy_probability: 0.5,
            rng_seed: 0,
        }
    }
}

impl AugmentationConfig {
    /// Rotation only: the symmetry expansion without remedies.
    pub fn symmetry_only(seed: u64) -> Self {
        Self {
            resample: false,
            zero_pillars: false,
            scale: false,
            permute: false,
            mix: false,
            rng_seed: seed,
            ..Self::default()
        }
    }

    /// Every transform disabled.
    pub fn disabled(expansion_factor: usize, seed: u64) -> Self {
        Self { expansion_factor, rotation: false, ..Self::symmetry_only(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        let (klo, khi) = self.resample_keep_fraction;
        if !(klo > 0.0 && klo <= khi && khi <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "keep fraction range must lie in (0, 1], got [{klo}, {khi}]"
            )));
        }
        let (zlo, zhi) = self.zero_pillar_count;
        if zlo > zhi || zhi > PILLAR_COUNT - 1 {
            return Err(CoreError::InvalidParameter(format!(
                "zero pillar count range must lie in 0..=8, got [{zlo}, {zhi}]"
            )));
        }
        let (slo, shi) = self.scale_range;
        if !(slo > 0.0 && slo <= shi && shi.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "scale range must lie in (0, inf), got [{slo}, {shi}]"
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(CoreError::InvalidParameter("noise sigma must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.remedy_probability) {
            return Err(CoreError::InvalidParameter("remedy probability must lie in [0, 1]".into()));
        }
        if self.mix_pool_size == 0 {
            return Err(CoreError::InvalidParameter("mix pool must hold at least one sequence".into()));
        }
        Ok(())
    }
}

fn relabel(sequence: TactileSequence, onsets: Onsets) -> LabeledSequence {
    let annotation = incipient_interval_with_contact(&onsets, sequence.meta.movement, &sequence.meta.contact_mask);
    LabeledSequence { sequence, annotation }
}

/// Rotates every pillar's (fx, fy) by `theta` about the sensor normal.
pub fn rotate(seq: &TactileSequence, theta: f64) -> TactileSequence {
    let theta = theta.rem_euclid(TAU);
    let (s, c) = theta.sin_cos();
    let mut out = seq.clone();
    for frame in &mut out.frames {
        for f in &mut frame.forces {
            let (fx, fy) = (f[0], f[1]);
            f[0] = c * fx - s * fy;
            f[1] = s * fx + c * fy;
        }
    }
    out
}

/// Keeps the frames at `kept` (sorted, unique) and re-stamps them onto the
/// 1 ms grid. Each onset moves to the first kept frame at or after it.
pub fn resample_with_indices(item: &LabeledSequence, kept: &[usize]) -> Result<LabeledSequence> {
    let seq = &item.sequence;
    if kept.len() < MIN_SEQUENCE_FRAMES {
        return Err(CoreError::SequenceTooShort { len: kept.len(), min: MIN_SEQUENCE_FRAMES });
    }
    if kept.windows(2).any(|w| w[0] >= w[1]) || kept.last().is_some_and(|&i| i >= seq.len()) {
        return Err(CoreError::InvalidParameter("kept indices must be sorted, unique and in range".into()));
    }
    let t0 = seq.frames[0].t;
    let frames = kept
        .iter()
        .enumerate()
        .map(|(pos, &i)| PillarFrame { t: grid_time(t0, pos), forces: seq.frames[i].forces })
        .collect();
    let onsets = item.annotation.pillar_slip_onset.map(|onset| {
        let original = seq.index_at_or_after(onset?)?;
        let pos = kept.partition_point(|&i| i < original);
        (pos < kept.len()).then(|| grid_time(t0, pos))
    });
    Ok(relabel(TactileSequence::new(seq.meta.clone(), frames), onsets))
}

/// Keeps a random subset of `round(keep_fraction · N)` frames.
pub fn resample_velocity<R: Rng>(item: &LabeledSequence, keep_fraction: f64, rng: &mut R) -> Result<LabeledSequence> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(CoreError::InvalidParameter(format!("keep fraction must lie in (0, 1], got {keep_fraction}")));
    }
    let n = item.sequence.len();
    let m = (keep_fraction * n as f64).round() as usize;
    if m < MIN_SEQUENCE_FRAMES {
        return Err(CoreError::SequenceTooShort { len: m, min: MIN_SEQUENCE_FRAMES });
    }
    let mut kept = index::sample(rng, n, m).into_vec();
    kept.sort_unstable();
    resample_with_indices(item, &kept)
}

/// Replaces the selected pillars with zero-mean Gaussian noise and marks
/// them as out of contact.
pub fn zero_pillars<R: Rng>(item: &LabeledSequence, pillars: &[usize], sigma: f64, rng: &mut R) -> Result<LabeledSequence> {
    let mut selected = [false; PILLAR_COUNT];
    for &p in pillars {
        if p >= PILLAR_COUNT {
            return Err(CoreError::InvalidParameter(format!("pillar index {p} out of range")));
        }
        selected[p] = true;
    }
    let count = selected.iter().filter(|&&s| s).count();
    if count == 0 || count == PILLAR_COUNT {
        return Err(CoreError::InvalidParameter(format!("must zero between 1 and 8 pillars, got {count}")));
    }
    let mut seq = item.sequence.clone();
    if (0..PILLAR_COUNT).all(|p| selected[p] || !seq.meta.contact_mask[p]) {
        return Err(CoreError::InvalidParameter("zeroing would leave no pillar in contact".into()));
    }
    let noise = Normal::new(0.0, sigma)
        .map_err(|e| CoreError::InvalidParameter(format!("noise sigma {sigma}: {e}")))?;
    for frame in &mut seq.frames {
        for p in (0..PILLAR_COUNT).filter(|&p| selected[p]) {
            for v in &mut frame.forces[p] {
                *v = if sigma == 0.0 { 0.0 } else { noise.sample(rng) };
            }
        }
    }
    let mut onsets = item.annotation.pillar_slip_onset;
    for p in (0..PILLAR_COUNT).filter(|&p| selected[p]) {
        seq.meta.contact_mask[p] = false;
        onsets[p] = None;
    }
    Ok(relabel(seq, onsets))
}

/// Multiplies every force component of pillar `p` by `factors[p]`.
pub fn scale_pillars(seq: &TactileSequence, factors: &[f64; PILLAR_COUNT]) -> TactileSequence {
    let mut out = seq.clone();
    for frame in &mut out.frames {
        for (f, &c) in frame.forces.iter_mut().zip(factors) {
            for v in f.iter_mut() {
                *v *= c;
            }
        }
    }
    out
}

/// Factors of 1 except for a random non-empty subset of pillars, which
/// draw uniformly from `range`.
pub fn random_scale_factors<R: Rng>(range: (f64, f64), rng: &mut R) -> [f64; PILLAR_COUNT] {
    let count = rng.random_range(1..=PILLAR_COUNT);
    let mut factors = [1.0; PILLAR_COUNT];
    for p in index::sample(rng, PILLAR_COUNT, count) {
        factors[p] = rng.random_range(range.0..=range.1);
    }
    factors
}

fn check_permutation(perm: &[usize; PILLAR_COUNT]) -> Result<()> {
    let mut seen = [false; PILLAR_COUNT];
    for &p in perm {
        if p >= PILLAR_COUNT || std::mem::replace(&mut seen[p], true) {
            return Err(CoreError::InvalidParameter(format!("{perm:?} is not a permutation of 0..9")));
        }
    }
    Ok(())
}

pub fn inverse_permutation(perm: &[usize; PILLAR_COUNT]) -> [usize; PILLAR_COUNT] {
    let mut inv = [0; PILLAR_COUNT];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Output pillar `i` takes the channels, contact flag and onset of input
/// pillar `perm[i]`. The incipient interval is kept as is.
pub fn permute_pillars(item: &LabeledSequence, perm: &[usize; PILLAR_COUNT]) -> Result<LabeledSequence> {
    check_permutation(perm)?;
    let mut out = item.clone();
    for (dst, src) in out.sequence.frames.iter_mut().zip(&item.sequence.frames) {
        dst.forces = perm.map(|p| src.forces[p]);
    }
    out.sequence.meta.contact_mask = perm.map(|p| item.sequence.meta.contact_mask[p]);
    out.annotation.pillar_slip_onset = perm.map(|p| item.annotation.pillar_slip_onset[p]);
    Ok(out)
}

/// Assembles a sequence whose pillar `i` comes from pool member
/// `donors[i]`. All donors are truncated to the shortest pool member.
pub fn mix_with_donors(pool: &[&LabeledSequence], donors: &[usize; PILLAR_COUNT]) -> Result<LabeledSequence> {
    if pool.is_empty() {
        return Err(CoreError::InvalidParameter("mix pool is empty".into()));
    }
    if donors.iter().any(|&d| d >= pool.len()) {
        return Err(CoreError::InvalidParameter("donor index out of range".into()));
    }
    let len = pool.iter().map(|s| s.sequence.len()).min().unwrap_or(0);
    if len < MIN_SEQUENCE_FRAMES {
        return Err(CoreError::SequenceTooShort { len, min: MIN_SEQUENCE_FRAMES });
    }
    let base = &pool[0].sequence;
    let t0 = base.frames[0].t;
    let mut frames: Vec<PillarFrame> = base.frames[..len].iter().map(|f| PillarFrame::zeros(f.t)).collect();
    let mut onsets = [None; PILLAR_COUNT];
    let mut contact = [false; PILLAR_COUNT];
    for (p, &d) in donors.iter().enumerate() {
        let donor = pool[d];
        for (dst, src) in frames.iter_mut().zip(&donor.sequence.frames[..len]) {
            dst.forces[p] = src.forces[p];
        }
        let donor_t0 = donor.sequence.frames[0].t;
        let donor_last = donor.sequence.frames[len - 1].t;
        onsets[p] = donor.annotation.pillar_slip_onset[p]
            .filter(|&t| t <= donor_last)
            .map(|t| t0 + (t - donor_t0));
        contact[p] = donor.sequence.meta.contact_mask[p];
    }
    let mean = |f: fn(&SequenceMeta) -> f64| donors.iter().map(|&d| f(&pool[d].sequence.meta)).sum::<f64>() / PILLAR_COUNT as f64;
    let meta = SequenceMeta {
        // the center donor decides which pillars count toward the interval
        movement: pool[donors[crate::frame::CENTER_PILLAR]].sequence.meta.movement,
        compression_mm: mean(|m| m.compression_mm),
        drive_speed: mean(|m| m.drive_speed),
        contact_mask: contact,
        id: base.meta.id.clone(),
        provenance: None,
    };
    if meta.contacted_count() == 0 {
        return Err(CoreError::InvalidParameter("mixed sequence has no pillar in contact".into()));
    }
    Ok(relabel(TactileSequence::new(meta, frames), onsets))
}

/// Mixes with donors drawn uniformly from the pool.
pub fn mix_pillars<R: Rng>(pool: &[&LabeledSequence], rng: &mut R) -> Result<(LabeledSequence, [usize; PILLAR_COUNT])> {
    if pool.is_empty() {
        return Err(CoreError::InvalidParameter("mix pool is empty".into()));
    }
    let donors: [usize; PILLAR_COUNT] = std::array::from_fn(|_| rng.random_range(0..pool.len()));
    Ok((mix_with_donors(pool, &donors)?, donors))
}

/// Builds one derived sequence from `dataset[source]`.
fn derive_one(dataset: &[LabeledSequence], source: usize, seed: u64, config: &AugmentationConfig) -> Result<LabeledSequence> {
    let mut rng = rng_from_seed(seed);
    let mut steps = Vec::new();
    let mut item = dataset[source].clone();
    let p = config.remedy_probability;

    if config.mix && rng.random_bool(p) {
        let mut pool_idx = vec![source];
        pool_idx.extend((1..config.mix_pool_size).map(|_| rng.random_range(0..dataset.len())));
        let pool: Vec<&LabeledSequence> = pool_idx.iter().map(|&i| &dataset[i]).collect();
        match mix_pillars(&pool, &mut rng) {
            Ok((mixed, donors)) => {
                item = mixed;
                steps.push(TransformStep::Mix { donors: donors.map(|d| pool_idx[d]) });
            }
            Err(CoreError::SequenceTooShort { .. } | CoreError::InvalidParameter(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if config.resample && rng.random_bool(p) {
        let (lo, hi) = config.resample_keep_fraction;
        let keep = rng.random_range(lo..=hi);
        match resample_velocity(&item, keep, &mut rng) {
            Ok(out) => {
                steps.push(TransformStep::Resample { keep_fraction: keep, kept: out.sequence.len() });
                item = out;
            }
            Err(CoreError::SequenceTooShort { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if config.zero_pillars && rng.random_bool(p) {
        let contacted: Vec<usize> = (0..PILLAR_COUNT).filter(|&q| item.sequence.meta.contact_mask[q]).collect();
        let (lo, hi) = config.zero_pillar_count;
        let hi = hi.min(contacted.len().saturating_sub(1));
        if hi >= 1 && lo <= hi {
            let count = rng.random_range(lo.max(1)..=hi);
            let mut pillars: Vec<usize> = contacted.choose_multiple(&mut rng, count).copied().collect();
            pillars.sort_unstable();
            item = zero_pillars(&item, &pillars, config.noise_sigma, &mut rng)?;
            steps.push(TransformStep::ZeroPillars { pillars, sigma: config.noise_sigma });
        }
    }
    if config.scale && rng.random_bool(p) {
        let factors = random_scale_factors(config.scale_range, &mut rng);
        item.sequence = scale_pillars(&item.sequence, &factors);
        steps.push(TransformStep::Scale { factors });
    }
    if config.permute && rng.random_bool(p) {
        let mut perm: [usize; PILLAR_COUNT] = std::array::from_fn(|i| i);
        perm.shuffle(&mut rng);
        item = permute_pillars(&item, &perm)?;
        steps.push(TransformStep::Permute { permutation: perm });
    }
    if config.rotation {
        let theta = rng.random_range(0.0..TAU);
        item.sequence = rotate(&item.sequence, theta);
        steps.push(TransformStep::Rotate { theta });
    }
    item.sequence.meta.provenance = Some(Provenance { source, seed, transforms: steps });
    Ok(item)
}

/// Emits `expansion_factor` derived sequences per input sequence, in
/// input order. Output `j * factor + c` is seeded from `(rng_seed, j, c)`,
/// so results do not depend on evaluation order.
pub fn augment_dataset(dataset: &[LabeledSequence], config: &AugmentationConfig) -> Result<Vec<LabeledSequence>> {
    config.validate()?;
    let mut out = Vec::with_capacity(dataset.len() * config.expansion_factor);
    for source in 0..dataset.len() {
        for copy in 0..config.expansion_factor {
            let seed = derive_seed2(config.rng_seed, source as u64, copy as u64);
            out.push(derive_one(dataset, source, seed, config)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{incipient_interval, SequenceClass, SlipAnnotation};
    use crate::frame::{Movement, CENTER_PILLAR};
    use crate::seed::rng_from_seed;
    use crate::window::WINDOW_LEN;
    use std::f64::consts::FRAC_PI_2;

    fn labeled(n: usize, movement: Movement, onset_ms: &[(usize, f64)]) -> LabeledSequence {
        let frames = (0..n)
            .map(|i| {
                let mut f = PillarFrame::zeros(grid_time(0.0, i));
                for p in 0..PILLAR_COUNT {
                    let x = i as f64 * 1e-3;
                    f.forces[p] = [(x * (p + 1) as f64).sin(), (x + p as f64).cos() * 0.5, 1.0 + 0.1 * p as f64];
                }
                f
            })
            .collect();
        let mut onsets = [None; PILLAR_COUNT];
        for &(p, ms) in onset_ms {
            onsets[p] = Some(ms / 1000.0);
        }
        let sequence = TactileSequence::new(SequenceMeta::new(movement, 1.0, 8.0), frames);
        LabeledSequence { annotation: incipient_interval(&onsets, movement), sequence }
    }

    #[test]
    fn rotation_examples() {
        let item = labeled(100, Movement::Translation, &[]);
        assert_eq!(rotate(&item.sequence, 0.0), item.sequence);

        let mut f = PillarFrame::zeros(0.0);
        f.forces[0] = [1.0, 0.0, 7.0];
        let seq = TactileSequence::new(SequenceMeta::new(Movement::Translation, 1.0, 1.0), vec![f]);
        let r = rotate(&seq, FRAC_PI_2);
        let [fx, fy, fz] = r.frames[0].forces[0];
        assert!(fx.abs() < 1e-15 && (fy - 1.0).abs() < 1e-15 && fz == 7.0);
    }

    #[test]
    fn resample_examples() {
        let item = labeled(400, Movement::Translation, &[(0, 100.0), (1, 250.0)]);
        let mut rng = rng_from_seed(1);
        let same = resample_velocity(&item, 1.0, &mut rng).unwrap();
        assert_eq!(same, item);

        let half = resample_velocity(&item, 0.5, &mut rng).unwrap();
        assert_eq!(half.sequence.len(), 200);
        let span = half.sequence.frames[199].t - half.sequence.frames[0].t;
        assert!((span - 0.199).abs() < 1e-12);
        half.sequence.validate().unwrap();

        assert!(matches!(
            resample_velocity(&item, 0.1, &mut rng),
            Err(CoreError::SequenceTooShort { .. })
        ));
    }

    #[test]
    fn resample_onset_moves_to_next_kept_frame() {
        let item = labeled(200, Movement::Translation, &[(3, 100.0), (5, 150.0)]);
        // index 100 dropped; 98 and 103 kept
        let kept: Vec<usize> = (0..200).filter(|&i| !(99..=102).contains(&i)).collect();
        let pos_103 = kept.iter().position(|&i| i == 103).unwrap();
        assert_eq!(pos_103, 99);
        let out = resample_with_indices(&item, &kept).unwrap();
        assert_eq!(out.annotation.pillar_slip_onset[3], Some(grid_time(0.0, pos_103)));
        assert_eq!(out.annotation.pillar_slip_onset[5], Some(grid_time(0.0, 146)));
        assert_eq!(out.annotation.incipient, Some((grid_time(0.0, 99), grid_time(0.0, 146))));
    }

    #[test]
    fn zero_pillar_examples() {
        let item = labeled(120, Movement::Translation, &[(0, 20.0), (4, 40.0), (8, 60.0)]);
        let mut rng = rng_from_seed(3);
        let out = zero_pillars(&item, &[0, 1], 0.0, &mut rng).unwrap();
        for f in &out.sequence.frames {
            assert_eq!(f.forces[0], [0.0; 3]);
            assert_eq!(f.forces[1], [0.0; 3]);
        }
        assert_eq!(out.sequence.meta.contact_mask[0], false);
        assert_eq!(out.annotation.pillar_slip_onset[0], None);
        assert_eq!(out.annotation.incipient, Some((0.04, 0.06)));

        let all: Vec<usize> = (0..9).collect();
        assert!(zero_pillars(&item, &all, 0.001, &mut rng).is_err());
        assert!(zero_pillars(&item, &[], 0.001, &mut rng).is_err());

        let rot = labeled(120, Movement::Rotation, &[(0, 20.0), (8, 60.0)]);
        let out = zero_pillars(&rot, &[CENTER_PILLAR], 0.001, &mut rng).unwrap();
        assert_eq!(out.annotation.incipient, rot.annotation.incipient);
    }

    #[test]
    fn zero_pillar_noise_is_centered() {
        // 10 000 samples over 4 pillars × 3 axes
        let n = 834;
        let item = labeled(n, Movement::Translation, &[]);
        let mut rng = rng_from_seed(11);
        let out = zero_pillars(&item, &[0, 1, 2, 3], 0.001, &mut rng).unwrap();
        let samples: Vec<f64> = out
            .sequence
            .frames
            .iter()
            .flat_map(|f| (0..4).flat_map(move |p| f.forces[p]))
            .take(10_000)
            .collect();
        assert_eq!(samples.len(), 10_000);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!(mean.abs() <= 4.0 * 0.001 / 100.0, "mean {mean}");
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        assert!((var.sqrt() - 0.001).abs() < 0.0001);
    }

    #[test]
    fn zeroing_cannot_remove_last_contact() {
        let mut item = labeled(100, Movement::Translation, &[]);
        item.sequence.meta.contact_mask = [false, true, true, false, false, false, false, false, false];
        let mut rng = rng_from_seed(0);
        assert!(zero_pillars(&item, &[1, 2], 0.001, &mut rng).is_err());
    }

    #[test]
    fn scale_examples() {
        let item = labeled(90, Movement::Translation, &[]);
        assert_eq!(scale_pillars(&item.sequence, &[1.0; 9]), item.sequence);
        let mut factors = [1.0; 9];
        factors[2] = 2.0;
        let out = scale_pillars(&item.sequence, &factors);
        for (a, b) in out.frames.iter().zip(&item.sequence.frames) {
            for k in 0..3 {
                assert_eq!(a.forces[2][k], 2.0 * b.forces[2][k]);
            }
            assert!((a.tangential_norm(2) - 2.0 * b.tangential_norm(2)).abs() < 1e-12);
            assert_eq!(a.forces[3], b.forces[3]);
        }
    }

    #[test]
    fn permutation_examples() {
        let item = labeled(90, Movement::Translation, &[(1, 30.0), (7, 80.0)]);
        let id: [usize; 9] = std::array::from_fn(|i| i);
        assert_eq!(permute_pillars(&item, &id).unwrap(), item);
        let perm = [3, 8, 0, 5, 1, 7, 2, 4, 6];
        let there = permute_pillars(&item, &perm).unwrap();
        assert_eq!(there.annotation.incipient, item.annotation.incipient);
        let back = permute_pillars(&there, &inverse_permutation(&perm)).unwrap();
        assert_eq!(back, item);
        assert!(permute_pillars(&item, &[0, 0, 1, 2, 3, 4, 5, 6, 7]).is_err());
    }

    #[test]
    fn mix_examples() {
        let a = labeled(150, Movement::Translation, &[(0, 30.0)]);
        let mut rng = rng_from_seed(5);
        let (single, donors) = mix_pillars(&[&a], &mut rng).unwrap();
        assert_eq!(donors, [0; 9]);
        assert_eq!(single.sequence.frames, a.sequence.frames);
        assert_eq!(single.annotation, a.annotation);

        let stop1 = labeled(100, Movement::Translation, &[]);
        let stop2 = labeled(120, Movement::Rotation, &[]);
        let (mixed, _) = mix_pillars(&[&stop1, &stop2], &mut rng).unwrap();
        assert_eq!(mixed.annotation.class, SequenceClass::Stop);
        assert_eq!(mixed.sequence.len(), 100);

        let donor_a = labeled(100, Movement::Translation, &[(2, 30.0)]);
        let donor_b = labeled(110, Movement::Translation, &[(6, 90.0)]);
        let donors = [0, 0, 0, 1, 1, 1, 1, 1, 1];
        let mixed = mix_with_donors(&[&donor_a, &donor_b], &donors).unwrap();
        assert_eq!(mixed.annotation.incipient, Some((0.03, 0.09)));
        assert!(mix_pillars(&[], &mut rng).is_err());
    }

    #[test]
    fn mix_drops_onsets_past_truncation() {
        let long = labeled(300, Movement::Translation, &[(0, 250.0), (1, 20.0)]);
        let short = labeled(100, Movement::Translation, &[]);
        let mixed = mix_with_donors(&[&long, &short], &[0, 0, 1, 1, 1, 1, 1, 1, 1]).unwrap();
        assert_eq!(mixed.annotation.pillar_slip_onset[0], None);
        assert_eq!(mixed.annotation.pillar_slip_onset[1], Some(0.02));
    }

    fn corpus(n: usize) -> Vec<LabeledSequence> {
        (0..n)
            .map(|i| match i % 3 {
                0 => labeled(200 + 10 * i, Movement::Translation, &[(0, 60.0), (3, 90.0), (8, 150.0)]),
                1 => labeled(180 + 5 * i, Movement::Rotation, &[(1, 70.0), (5, 120.0)]),
                _ => LabeledSequence { annotation: SlipAnnotation::stop(), ..labeled(160, Movement::Translation, &[]) },
            })
            .collect()
    }

    #[test]
    fn expansion_counts_and_identity() {
        let data = corpus(6);
        let out = augment_dataset(&data, &AugmentationConfig { rng_seed: 9, ..Default::default() }).unwrap();
        assert_eq!(out.len(), 30);
        for item in &out {
            item.sequence.validate().unwrap();
            assert!(item.sequence.meta.provenance.is_some());
        }
        let same = augment_dataset(&data, &AugmentationConfig::disabled(1, 0)).unwrap();
        for (a, b) in same.iter().zip(&data) {
            assert_eq!(a.sequence.frames, b.sequence.frames);
            assert_eq!(a.annotation, b.annotation);
        }
    }

    #[test]
    fn expansion_is_deterministic() {
        let data = corpus(5);
        let cfg = AugmentationConfig { rng_seed: 77, ..Default::default() };
        assert_eq!(augment_dataset(&data, &cfg).unwrap(), augment_dataset(&data, &cfg).unwrap());
        let other = AugmentationConfig { rng_seed: 78, ..Default::default() };
        assert_ne!(augment_dataset(&data, &cfg).unwrap(), augment_dataset(&data, &other).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(AugmentationConfig::default().validate().is_ok());
        let bad = [
            AugmentationConfig { scale_range: (0.0, 2.0), ..Default::default() },
            AugmentationConfig { resample_keep_fraction: (0.5, 1.2), ..Default::default() },
            AugmentationConfig { zero_pillar_count: (1, 9), ..Default::default() },
            AugmentationConfig { noise_sigma: -1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn symmetry_windows_are_long_enough() {
        // every derived sequence in the symmetry-only setting keeps its length
        let data = corpus(3);
        let out = augment_dataset(&data, &AugmentationConfig::symmetry_only(4)).unwrap();
        for (k, item) in out.iter().enumerate() {
            assert_eq!(item.sequence.len(), data[k / 5].sequence.len());
            assert!(item.sequence.len() >= 2 * WINDOW_LEN);
        }
    }
}
