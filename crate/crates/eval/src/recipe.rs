//! The end-to-end recipe: generate, split, augment, train, evaluate.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tactislip_core::seed::derive_seed;
use tactislip_core::{augment_dataset, AugmentationConfig, LabeledSequence, Movement, SequenceClass};
use tactislip_nn::{train_ensemble, EnsembleConfig, EnsembleModel};
use tactislip_sim::{generate_dataset, ScenarioGrid};

use crate::judge::{SequenceOutcome, Verdict};
use crate::metrics::{detection_latency, histogram, latencies_ms, normalized_displacement, ConfusionMatrix, Displacement, LatencySummary};
use crate::pipeline::{evaluate_model, select, stratified_split, tag_copies, training_sequences, Split};
use crate::{EvalError, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecipeConfig {
    pub grid: ScenarioGrid,
    pub train_ratio: f64,
    pub split_seed: u64,
    pub train_augmentation: AugmentationConfig,
    /// Applied to the held-out sequences to form the augmented test set.
    pub test_augmentation: AugmentationConfig,
    pub ensemble: EnsembleConfig,
    pub latency_bin_ms: f64,
}

impl Default for RecipeConfig {
    fn default() -> Self {
        Self::with_master_seed(0)
    }
}

impl RecipeConfig {
    /// Defaults with every stage seeded from `seed`.
    pub fn with_master_seed(seed: u64) -> Self {
        let mut cfg = Self {
            grid: ScenarioGrid::default(),
            train_ratio: 0.8,
            split_seed: 0,
            train_augmentation: AugmentationConfig::symmetry_only(0),
            test_augmentation: AugmentationConfig::symmetry_only(0),
            ensemble: EnsembleConfig::default(),
            latency_bin_ms: 20.0,
        };
        cfg.reseed(seed);
        cfg
    }

    /// Re-derives every stage seed from `seed`.
    pub fn reseed(&mut self, seed: u64) {
        self.grid.seed = derive_seed(seed, 0);
        self.split_seed = derive_seed(seed, 1);
        self.train_augmentation.rng_seed = derive_seed(seed, 2);
        self.test_augmentation.rng_seed = derive_seed(seed, 3);
        self.ensemble.train.seed = derive_seed(seed, 4);
    }
}

/// Every dataset the recipe builds before training.
#[derive(Debug, Clone)]
pub struct RecipeData {
    pub corpus: Vec<LabeledSequence>,
    pub split: Split,
    pub train_raw: Vec<LabeledSequence>,
    pub train: Vec<LabeledSequence>,
    pub test_raw: Vec<LabeledSequence>,
    pub test: Vec<LabeledSequence>,
}

pub fn augment_tagged(items: &[LabeledSequence], config: &AugmentationConfig) -> Result<Vec<LabeledSequence>> {
    let mut out = augment_dataset(items, config)?;
    tag_copies(&mut out, config.expansion_factor);
    Ok(out)
}

pub fn build_data(config: &RecipeConfig) -> Result<RecipeData> {
    let corpus = generate_dataset(&config.grid)?;
    let classes: Vec<SequenceClass> = corpus.iter().map(|c| c.annotation.class).collect();
    let split = stratified_split(&classes, config.train_ratio, config.split_seed)?;
    let train_raw = select(&corpus, &split.train);
    let test_raw = select(&corpus, &split.test);
    let train = augment_tagged(&train_raw, &config.train_augmentation)?;
    let test = augment_tagged(&test_raw, &config.test_augmentation)?;
    Ok(RecipeData { corpus, split, train_raw, train, test_raw, test })
}

pub fn train_model(train: &[LabeledSequence], config: &EnsembleConfig) -> Result<EnsembleModel> {
    let data = training_sequences(train)?;
    Ok(train_ensemble(&data, None, config)?)
}

/// Results on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub units: usize,
    pub confusion: ConfusionMatrix,
    pub success_rate: f64,
    pub stop_false_alarm_rate: f64,
    pub latency: Option<LatencySummary>,
    pub outcomes: Vec<SequenceOutcome>,
}

impl SetReport {
    pub fn from_outcomes(outcomes: Vec<SequenceOutcome>) -> Result<Self> {
        let confusion = ConfusionMatrix::from_outcomes(&outcomes)?;
        Ok(Self {
            units: outcomes.len(),
            success_rate: confusion.success_rate(),
            stop_false_alarm_rate: confusion.stop_false_alarm_rate(),
            latency: detection_latency(&outcomes),
            confusion,
            outcomes,
        })
    }
}

/// Results on the augmented test units and on the raw held-out sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub augmented: SetReport,
    pub raw: SetReport,
}

pub fn evaluate_sets(model: &EnsembleModel, test: &[LabeledSequence], test_raw: &[LabeledSequence]) -> Result<EvalReport> {
    Ok(EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        augmented: SetReport::from_outcomes(evaluate_model(model, test)?)?,
        raw: SetReport::from_outcomes(evaluate_model(model, test_raw)?)?,
    })
}

pub struct RecipeOutput {
    pub data: RecipeData,
    pub model: EnsembleModel,
    pub report: EvalReport,
}

pub fn run_recipe(config: &RecipeConfig) -> Result<RecipeOutput> {
    let data = build_data(config)?;
    log::info!(
        "corpus {} sequences; train {} ({} augmented), test {} ({} augmented)",
        data.corpus.len(),
        data.train_raw.len(),
        data.train.len(),
        data.test_raw.len(),
        data.test.len()
    );
    let model = train_model(&data.train, &config.ensemble)?;
    let report = evaluate_sets(&model, &data.test, &data.test_raw)?;
    Ok(RecipeOutput { data, model, report })
}

/// Drive displacement of a simulated run at time `t`, from its scenario.
pub fn drive_displacement(grid: &ScenarioGrid, id: &str, t: f64) -> Option<Displacement> {
    let scenario = grid.scenario(grid.run_index(id)?);
    let (translation, rotation) = scenario.profiles();
    Some(match scenario.movement {
        Movement::Translation => Displacement::Translation { mm: translation.position(t) },
        Movement::Rotation => Displacement::Rotation { deg: rotation.position(t) },
        Movement::TranslationRotation => Displacement::Compound { mm: translation.position(t), deg: rotation.position(t) },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct DisplacementRow<'a> {
    id: &'a str,
    movement: &'static str,
    verdict: Verdict,
    detection_time_s: f64,
    translation_mm: f64,
    rotation_deg: f64,
    d_norm: f64,
}

#[derive(Serialize)]
struct ConfusionArtifact<'a> {
    format_version: u32,
    augmented: ConfusionEntry<'a>,
    raw: ConfusionEntry<'a>,
}

#[derive(Serialize)]
struct ConfusionEntry<'a> {
    units: usize,
    #[serde(flatten)]
    confusion: &'a ConfusionMatrix,
    success_rate: f64,
    stop_false_alarm_rate: f64,
}

impl<'a> From<&'a SetReport> for ConfusionEntry<'a> {
    fn from(r: &'a SetReport) -> Self {
        Self { units: r.units, confusion: &r.confusion, success_rate: r.success_rate, stop_false_alarm_rate: r.stop_false_alarm_rate }
    }
}

/// Writes `report.json`, `confusion.json`, `latency_histogram.csv` and,
/// when the scenario grid is known, `displacement.csv`. Returns the paths
/// written, in that order.
pub fn write_artifacts(report: &EvalReport, grid: Option<&ScenarioGrid>, bin_ms: f64, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    emit("report.json", serde_json::to_vec_pretty(report)?)?;
    let confusion = ConfusionArtifact {
        format_version: REPORT_FORMAT_VERSION,
        augmented: (&report.augmented).into(),
        raw: (&report.raw).into(),
    };
    emit("confusion.json", serde_json::to_vec_pretty(&confusion)?)?;

    let latencies = latencies_ms(&report.augmented.outcomes);
    let hist = histogram(&latencies, -300.0, 300.0, bin_ms)?;
    let mut csv_bytes = Vec::new();
    hist.write_csv(&mut csv_bytes)?;
    emit("latency_histogram.csv", csv_bytes)?;

    if let Some(grid) = grid {
        let mut w = csv::Writer::from_writer(Vec::new());
        for o in report.augmented.outcomes.iter().filter(|o| o.class == SequenceClass::Slip) {
            let Some(t) = o.detection_time else { continue };
            let Some(d) = drive_displacement(grid, &o.id, t) else { continue };
            let (mm, deg, movement) = match d {
                Displacement::Translation { mm } => (mm, 0.0, Movement::Translation),
                Displacement::Rotation { deg } => (0.0, deg, Movement::Rotation),
                Displacement::Compound { mm, deg } => (mm, deg, Movement::TranslationRotation),
            };
            w.serialize(DisplacementRow {
                id: &o.id,
                movement: movement.name(),
                verdict: o.verdict,
                detection_time_s: t,
                translation_mm: mm,
                rotation_deg: deg,
                d_norm: normalized_displacement(d),
            })?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
        emit("displacement.csv", bytes)?;
    }
    Ok(written)
}
