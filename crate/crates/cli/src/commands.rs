use std::collections::BTreeMap;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use tactislip_core::dataset::{annotation_path, write_labeled};
use tactislip_core::seed::derive_seed;
use tactislip_core::{load_dataset, load_labeled, AugmentationConfig, LabeledSequence, MedianMode, SequenceClass, WINDOW_LEN};
use tactislip_eval::pipeline::{select, training_sequences};
use tactislip_eval::recipe::augment_tagged;
use tactislip_eval::{ablation_compare, evaluate_sets, shifted_test_set, stratified_split, write_artifacts, SetReport};
use tactislip_nn::{train_ensemble, Bagging, EnsembleModel, NetworkConfig};
use tactislip_runtime::{run_file, run_lines, DecisionEvent, DetectorSession, Pace};
use tactislip_sim::{generate_dataset, ScenarioGrid};

use crate::config::FileConfig;
use crate::error::{CliError, Result};
use crate::output::{manifest_path_for, FileDigest, RunManifest, Staged, MANIFEST_FORMAT_VERSION};
use crate::{
    AugmentArgs, BaggingArg, Cli, Command, DetectArgs, EvalArgs, GenerateArgs, InspectArgs, NetworkSize, ReplayArgs, SplitArgs,
    TrainArgs,
};

/// Runs one command. Returns the manifest when the command wrote one.
pub fn run(cli: &Cli, config: FileConfig, args: Vec<String>) -> Result<Option<RunManifest>> {
    let run = Run::new(args);
    match &cli.command {
        Command::Generate(a) => generate(a, config, run).map(Some),
        Command::Augment(a) => augment(a, config, run).map(Some),
        Command::Split(a) => split(a, config, run).map(Some),
        Command::Train(a) => train(a, config, run).map(Some),
        Command::Eval(a) => eval(a, config, run).map(Some),
        Command::Detect(a) => detect(a, config, run),
        Command::Inspect(a) => inspect(a).map(|_| None),
        Command::Replay(a) => replay(a),
    }
}

struct Run {
    args: Vec<String>,
    started: Instant,
    inputs: Vec<FileDigest>,
    seeds: BTreeMap<String, u64>,
    staged: Staged,
}

impl Run {
    fn new(args: Vec<String>) -> Self {
        Self { args, started: Instant::now(), inputs: Vec::new(), seeds: BTreeMap::new(), staged: Staged::new() }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of_file(path)?);
        Ok(())
    }

    fn load_labeled(&mut self, path: &Path) -> Result<Vec<LabeledSequence>> {
        let items = load_labeled(path).map_err(|e| CliError::data(path.display(), e))?;
        self.input(path)?;
        self.input(&annotation_path(path))?;
        Ok(items)
    }

    fn stage_labeled(&mut self, path: &Path, items: &[LabeledSequence]) -> Result<()> {
        let (mut data, mut labels) = (Vec::new(), Vec::new());
        write_labeled(&mut data, &mut labels, items)?;
        self.staged.add(path, &data)?;
        self.staged.add(&annotation_path(path), &labels)
    }

    /// Stages the manifest next to the outputs and commits everything.
    fn finish(mut self, command: &str, config: &FileConfig, manifest_path: &Path) -> Result<RunManifest> {
        let manifest = RunManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            command: command.to_string(),
            args: self.args,
            working_dir: std::env::current_dir()?.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config)?,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: self.staged.digests(),
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        self.staged.add(manifest_path, &serde_json::to_vec_pretty(&manifest)?)?;
        self.staged.commit()?;
        Ok(manifest)
    }
}

fn class_counts(items: &[LabeledSequence]) -> (usize, usize) {
    let slip = items.iter().filter(|i| i.annotation.class == SequenceClass::Slip).count();
    (slip, items.len() - slip)
}

fn generate(a: &GenerateArgs, mut config: FileConfig, mut run: Run) -> Result<RunManifest> {
    let grid = &mut config.generate;
    if let Some(n) = a.slip {
        grid.slip_count = n;
    }
    if let Some(n) = a.stop {
        grid.stop_count = n;
    }
    if let Some(seed) = a.seed {
        grid.seed = seed;
    }
    let corpus = generate_dataset(grid)?;
    run.seeds.insert("grid".into(), grid.seed);
    run.stage_labeled(&a.out, &corpus)?;
    let (slip, stop) = class_counts(&corpus);
    log::info!("generated {} sequences: {slip} slip, {stop} stop", corpus.len());
    run.finish("generate", &config, &manifest_path_for(&a.out))
}

fn augment(a: &AugmentArgs, mut config: FileConfig, mut run: Run) -> Result<RunManifest> {
    let mut aug = config.augment.clone();
    if a.symmetry_only {
        aug = AugmentationConfig { expansion_factor: aug.expansion_factor, ..AugmentationConfig::symmetry_only(aug.rng_seed) };
    }
    if let Some(f) = a.factor {
        aug.expansion_factor = f;
    }
    if let Some(seed) = a.seed {
        aug.rng_seed = seed;
    }
    config.augment = aug.clone();
    let items = run.load_labeled(&a.input)?;
    let out = augment_tagged(&items, &aug)?;
    run.seeds.insert("augment".into(), aug.rng_seed);
    run.stage_labeled(&a.out, &out)?;
    log::info!("augmented {} sequences into {}", items.len(), out.len());
    run.finish("augment", &config, &manifest_path_for(&a.out))
}

fn split(a: &SplitArgs, mut config: FileConfig, mut run: Run) -> Result<RunManifest> {
    if let Some(r) = a.ratio {
        config.split.ratio = r;
    }
    if let Some(seed) = a.seed {
        config.split.seed = seed;
    }
    if !(config.split.ratio > 0.0 && config.split.ratio < 1.0) {
        return Err(CliError::Usage(format!("split ratio must lie in (0, 1), got {}", config.split.ratio)));
    }
    let items = run.load_labeled(&a.input)?;
    let classes: Vec<SequenceClass> = items.iter().map(|i| i.annotation.class).collect();
    let parts = stratified_split(&classes, config.split.ratio, config.split.seed)?;
    let train = select(&items, &parts.train);
    let test = select(&items, &parts.test);
    run.seeds.insert("split".into(), config.split.seed);
    run.stage_labeled(&a.train_out, &train)?;
    run.stage_labeled(&a.test_out, &test)?;
    let ((tr_slip, tr_stop), (te_slip, te_stop)) = (class_counts(&train), class_counts(&test));
    log::info!(
        "train {} ({tr_slip} slip + {tr_stop} stop), test {} ({te_slip} slip + {te_stop} stop)",
        train.len(),
        test.len()
    );
    run.finish("split", &config, &manifest_path_for(&a.train_out))
}

fn train(a: &TrainArgs, mut config: FileConfig, mut run: Run) -> Result<RunManifest> {
    let ens = &mut config.train;
    if let Some(n) = a.members {
        ens.members = n;
    }
    if let Some(n) = a.epochs {
        ens.train.epochs = n;
    }
    if let Some(seed) = a.seed {
        ens.train.seed = seed;
    }
    if let Some(lr) = a.lr {
        ens.train.lr = lr;
    }
    if let Some(b) = a.batch_windows {
        ens.train.batch_windows = b;
    }
    if let Some(size) = a.network {
        let input_dim = ens.network.input_dim;
        ens.network = match size {
            NetworkSize::Toy => NetworkConfig::toy(),
            NetworkSize::Mid => NetworkConfig::mid(),
            NetworkSize::Full => NetworkConfig::full(),
        };
        ens.network.input_dim = input_dim;
    }
    if let Some(b) = a.bagging {
        ens.bagging = match b {
            BaggingArg::PerEpoch => Bagging::PerEpoch,
            BaggingArg::PerStep => Bagging::PerStep,
        };
    }
    ens.validate()?;
    let ens = ens.clone();

    let items = run.load_labeled(&a.train)?;
    let data = training_sequences(&items)?;
    let validation = match &a.validation {
        Some(path) => Some(training_sequences(&run.load_labeled(path)?)?),
        None => None,
    };
    let windows: usize = data.iter().map(|d| d.len()).sum();
    log::info!(
        "training {} members for {} epochs on {} sequences ({windows} windows)",
        ens.members,
        ens.train.epochs,
        data.len()
    );
    let model = train_ensemble(&data, validation.as_deref(), &ens)?;
    if !model.members.iter().all(|m| m.all_finite()) {
        return Err(CliError::Numeric("trained parameters are not finite".into()));
    }
    run.seeds.insert("train".into(), ens.train.seed);
    for z in 0..ens.members {
        run.seeds.insert(format!("member{z}"), derive_seed(ens.train.seed, z as u64));
    }
    run.staged.add(&a.out, model.to_json()?.as_bytes())?;
    run.finish("train", &config, &manifest_path_for(&a.out))
}

/// Reads a grid from a `generate` manifest or from a bare grid JSON file.
fn load_grid(path: &Path) -> Result<ScenarioGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::data(path.display(), e))?;
    let grid = match value.get("command") {
        Some(_) => value.get("config").and_then(|c| c.get("generate")).cloned().unwrap_or_default(),
        None => value,
    };
    serde_json::from_value(grid).map_err(|e| CliError::data(path.display(), e))
}

fn load_model(run: &mut Run, path: &Path) -> Result<EnsembleModel> {
    let model = EnsembleModel::load(path).map_err(|e| CliError::data(path.display(), e))?;
    run.input(path)?;
    Ok(model)
}

fn summary_line(name: &str, r: &SetReport) -> String {
    let c = &r.confusion;
    let latency = r.latency.as_ref().map_or("n/a".to_string(), |l| format!("{:.1} ms", l.median_ms));
    format!(
        "{name}: {} units, TP {} FN {} FP {} TN {}, success {:.3}, stop false alarms {:.3}, median latency {latency}",
        r.units, c.tp, c.fn_, c.fp, c.tn, r.success_rate, r.stop_false_alarm_rate
    )
}

fn eval(a: &EvalArgs, mut config: FileConfig, mut run: Run) -> Result<RunManifest> {
    if let Some(bin) = a.latency_bin_ms {
        config.eval.latency_bin_ms = bin;
    }
    if let Some(seed) = a.ablation_seed {
        config.eval.ablation_seed = seed;
    }
    if !(config.eval.latency_bin_ms > 0.0) {
        return Err(CliError::Usage("latency bin width must be positive".into()));
    }
    let model = load_model(&mut run, &a.model)?;
    let test = run.load_labeled(&a.test)?;
    let raw = match &a.raw {
        Some(path) => run.load_labeled(path)?,
        None => test.clone(),
    };
    if test.is_empty() || raw.is_empty() {
        return Err(CliError::Data("test set is empty".into()));
    }
    let grid = match &a.grid {
        Some(path) => {
            run.input(path)?;
            Some(load_grid(path)?)
        }
        None => None,
    };
    let report = evaluate_sets(&model, &test, &raw)?;

    let scratch = tempfile::tempdir()?;
    for path in write_artifacts(&report, grid.as_ref(), config.eval.latency_bin_ms, scratch.path())? {
        let name = path.file_name().expect("artifact file name");
        run.staged.add(&a.out_dir.join(name), &std::fs::read(&path)?)?;
    }
    println!("{}", summary_line("augmented", &report.augmented));
    println!("{}", summary_line("raw", &report.raw));

    if let Some(plain_path) = &a.plain_model {
        let plain = load_model(&mut run, plain_path)?;
        let shifted = shifted_test_set(&raw, config.eval.ablation_seed)?;
        let result = ablation_compare(&model, &plain, &shifted)?;
        run.seeds.insert("ablation".into(), config.eval.ablation_seed);
        println!(
            "ablation on {} shifted units: misclassified {} with remedies, {} without",
            shifted.len(),
            result.augmented.misclassifications(),
            result.plain.misclassifications()
        );
        run.staged.add(&a.out_dir.join("ablation.json"), &serde_json::to_vec_pretty(&result)?)?;
    }
    run.finish("eval", &config, &a.out_dir.join("manifest.json"))
}

#[derive(Serialize)]
struct TaggedEvent<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    sequence: Option<&'a str>,
    #[serde(flatten)]
    event: &'a DecisionEvent,
}

fn detect(a: &DetectArgs, mut config: FileConfig, mut run: Run) -> Result<Option<RunManifest>> {
    if a.causal {
        config.detect.mode = MedianMode::Causal;
    }
    if let Some(d) = a.deadline_ms {
        config.detect.deadline_ms = d;
    }
    let pace = match a.realtime {
        Some(s) if s > 0.0 && s.is_finite() => Pace::RealTime { speedup: s },
        Some(s) => return Err(CliError::Usage(format!("--realtime needs a positive speedup, got {s}"))),
        None => Pace::Accelerated,
    };
    let model = load_model(&mut run, &a.model)?;
    let mut session = DetectorSession::new(model, config.detect)?;

    let mut bytes = Vec::new();
    let stats = match &a.input {
        Some(path) => {
            run.input(path)?;
            let log = run_file(&mut session, path, pace)?;
            for seq in &log.sequences {
                for event in &seq.events {
                    serde_json::to_writer(&mut bytes, &TaggedEvent { sequence: seq.id.as_deref(), event })?;
                    bytes.push(b'\n');
                }
            }
            if a.out.is_none() {
                std::io::stdout().lock().write_all(&bytes)?;
            }
            log.stats
        }
        None if a.out.is_some() => run_lines(&mut session, BufReader::new(std::io::stdin()), &mut bytes, a.queue)?,
        None => run_lines(&mut session, BufReader::new(std::io::stdin()), &mut std::io::stdout().lock(), a.queue)?,
    };
    log::info!(
        "{} decisions; compute p50 {:.3} ms, p99 {:.3} ms, max {:.3} ms; {} deadline misses",
        stats.windows,
        stats.p50_ms,
        stats.p99_ms,
        stats.max_ms,
        stats.deadline_misses
    );
    match &a.out {
        Some(out) => {
            run.staged.add(out, &bytes)?;
            run.finish("detect", &config, &manifest_path_for(out)).map(Some)
        }
        None => Ok(None),
    }
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    ok: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    detail: String,
}

impl Check {
    fn new(name: &'static str, failures: Vec<String>) -> Self {
        let ok = failures.is_empty();
        let mut detail = failures.into_iter().take(5).collect::<Vec<_>>().join("; ");
        if !ok && detail.is_empty() {
            detail = "failed".into();
        }
        Self { name, ok, detail }
    }
}

fn inspect(a: &InspectArgs) -> Result<()> {
    let path = &a.path;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))?;
    let looks_like_model = serde_json::from_str::<serde_json::Value>(&text).is_ok_and(|v| v.get("members").is_some());
    let (summary, checks) = if looks_like_model { inspect_model(path, &text)? } else { inspect_dataset(path)? };
    let failed: Vec<&str> = checks.iter().filter(|c| !c.ok).map(|c| c.name).collect();
    let mut out = summary;
    out["checks"] = serde_json::to_value(&checks)?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{}: failed checks: {}", path.display(), failed.join(", "))))
    }
}

fn inspect_model(path: &Path, text: &str) -> Result<(serde_json::Value, Vec<Check>)> {
    let model = EnsembleModel::from_json(text).map_err(|e| CliError::data(path.display(), e))?;
    let parameters: usize = model.members[0].params.iter().map(|p| p.len()).sum();
    let non_finite: Vec<String> =
        model.members.iter().enumerate().filter(|(_, m)| !m.all_finite()).map(|(z, _)| format!("member {z}")).collect();
    let summary = serde_json::json!({
        "kind": "model",
        "members": model.members.len(),
        "threshold": model.threshold,
        "lambda": model.lambda,
        "master_seed": model.master_seed,
        "network": model.config(),
        "parameters_per_member": parameters,
        "provenance": model.provenance,
    });
    Ok((summary, vec![Check::new("finite_parameters", non_finite)]))
}

fn inspect_dataset(path: &Path) -> Result<(serde_json::Value, Vec<Check>)> {
    let sidecar = annotation_path(path);
    let labeled = if sidecar.exists() {
        Some(load_labeled(path).map_err(|e| CliError::data(path.display(), e))?)
    } else {
        None
    };
    let sequences = match &labeled {
        Some(items) => items.iter().map(|i| i.sequence.clone()).collect(),
        None => load_dataset(path).map_err(|e| CliError::data(path.display(), e))?,
    };
    let frames: usize = sequences.iter().map(|s| s.len()).sum();
    let windows: usize = sequences.iter().map(|s| s.len() / WINDOW_LEN).sum();
    let durations: Vec<f64> = sequences
        .iter()
        .filter_map(|s| Some(s.frames.last()?.t - s.frames.first()?.t))
        .collect();
    let mut movements = BTreeMap::new();
    for s in &sequences {
        *movements.entry(s.meta.movement.name()).or_insert(0usize) += 1;
    }
    let invalid: Vec<String> = sequences
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.validate().err().map(|e| format!("sequence {i}: {e}")))
        .collect();
    let mut checks = vec![Check::new("valid_sequences", invalid)];

    let mut summary = serde_json::json!({
        "kind": "dataset",
        "sequences": sequences.len(),
        "frames": frames,
        "windows": windows,
        "duration_s": {
            "min": durations.iter().copied().fold(f64::INFINITY, f64::min),
            "max": durations.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
        "movements": movements,
        "labeled": labeled.is_some(),
    });
    if sequences.is_empty() {
        summary["duration_s"] = serde_json::Value::Null;
    }
    if let Some(items) = &labeled {
        let (slip, stop) = class_counts(items);
        let with_interval = items.iter().filter(|i| i.annotation.incipient.is_some()).count();
        summary["classes"] = serde_json::json!({ "slip": slip, "stop": stop });
        summary["incipient_intervals"] = with_interval.into();
        let bad: Vec<String> = items
            .iter()
            .enumerate()
            .filter_map(|(i, item)| {
                let a = &item.annotation;
                let (t0, t1) = (item.sequence.frames.first()?.t, item.sequence.frames.last()?.t);
                match (a.class, a.incipient) {
                    (SequenceClass::Stop, Some(_)) => Some(format!("sequence {i}: stop run with an incipient interval")),
                    (_, Some((s, e))) if !(t0 <= s && s <= e && e <= t1) => {
                        Some(format!("sequence {i}: interval [{s}, {e}] outside [{t0}, {t1}]"))
                    }
                    _ => None,
                }
            })
            .collect();
        checks.push(Check::new("consistent_annotations", bad));
    }
    Ok((summary, checks))
}

fn replay(a: &ReplayArgs) -> Result<Option<RunManifest>> {
    use clap::Parser;
    let recorded = RunManifest::load(&a.manifest)?;
    let argv: Vec<String> = std::iter::once("tactislip".to_string()).chain(recorded.args.iter().cloned()).collect();
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Data(format!("recorded arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Data("a manifest cannot record a replay".into()));
    }
    let config: FileConfig = serde_json::from_value(recorded.config.clone())
        .map_err(|e| CliError::data(a.manifest.display(), e))?;
    std::env::set_current_dir(PathBuf::from(&recorded.working_dir))
        .map_err(|e| CliError::data(&recorded.working_dir, e))?;
    let fresh = run(&cli, config, recorded.args.clone())?
        .ok_or_else(|| CliError::Data("the recorded command wrote no manifest".into()))?;
    if a.verify {
        let key = |d: &FileDigest| (d.path.clone(), d.sha256.clone());
        let before: Vec<_> = recorded.outputs.iter().map(key).collect();
        let after: Vec<_> = fresh.outputs.iter().map(key).collect();
        if before != after {
            let changed: Vec<String> =
                after.iter().filter(|d| !before.contains(d)).map(|(p, _)| p.clone()).collect();
            return Err(CliError::Data(format!("replayed outputs differ: {}", changed.join(", "))));
        }
        log::info!("{} outputs reproduced byte for byte", after.len());
    }
    Ok(Some(fresh))
}
