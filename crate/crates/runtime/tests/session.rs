use std::cell::Cell;
use std::io::Cursor;
use std::time::Duration;

use ndarray::Array2;
use rand::Rng;
use tactislip_core::seed::rng_from_seed;
use tactislip_core::{
    prepare_unlabeled, save_dataset, MedianMode, Movement, PillarFrame, SequenceMeta, TactileSequence, WindowLabel, DEFAULT_MEDIAN_WINDOW,
};
use tactislip_nn::{EnsembleModel, Network, NetworkConfig};
use tactislip_runtime::{
    run_file, run_lines, run_sequence, Clock, DecisionEvent, DetectorSession, LogEntry, Pace, RuntimeError, SessionOptions,
};
use tactislip_sim::{generate_dataset, ScenarioGrid};

fn small_model(members: usize) -> EnsembleModel {
    let config = NetworkConfig { input_dim: 720, encoder_hidden: 16, encoder_out: 8, gru_hidden: 8, estimator_hidden: vec![8], classes: 2 };
    let nets = (0..members).map(|z| Network::new(config.clone(), &mut rng_from_seed(z as u64 + 1)).unwrap()).collect();
    EnsembleModel::new(nets, vec![None; members], 0.5, 0.4, 0).unwrap()
}

fn noise_sequence(n: usize, seed: u64) -> TactileSequence {
    let mut rng = rng_from_seed(seed);
    let frames = (0..n)
        .map(|i| {
            let mut f = PillarFrame::zeros(i as f64 * 1e-3);
            for p in f.forces.iter_mut() {
                *p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0)];
            }
            f
        })
        .collect();
    TactileSequence::new(SequenceMeta::new(Movement::Translation, 1.0, 10.0), frames)
}

fn sim_sequences() -> Vec<TactileSequence> {
    let grid = ScenarioGrid { slip_count: 5, stop_count: 2, seed: 4, ..Default::default() };
    generate_dataset(&grid).unwrap().into_iter().map(|l| l.sequence).collect()
}

/// Everything in an event except the measured compute time.
fn strip(events: &[DecisionEvent]) -> Vec<(u64, u64, WindowLabel)> {
    events.iter().map(|e| (e.t.to_bits(), e.p_mean.to_bits(), e.decision)).collect()
}

struct StepClock {
    now: Cell<Duration>,
    step: Duration,
}

impl Clock for StepClock {
    fn now(&self) -> Duration {
        let t = self.now.get();
        self.now.set(t + self.step);
        t
    }
}

#[test]
fn a_window_needs_forty_frames() {
    let seq = noise_sequence(40, 1);
    let causal = SessionOptions { mode: MedianMode::Causal, ..Default::default() };
    let mut s = DetectorSession::new(small_model(2), causal).unwrap();
    for f in &seq.frames[..39] {
        assert!(s.push_frame(*f).unwrap().is_none());
    }
    assert!(s.push_frame(seq.frames[39]).unwrap().is_some());
    assert!(s.finish().unwrap().is_empty());

    let mut s = DetectorSession::new(small_model(2), SessionOptions::default()).unwrap();
    let mut events: Vec<_> = seq.frames.iter().filter_map(|f| s.push_frame(*f).unwrap()).collect();
    assert!(events.is_empty(), "the centered filter holds back its last frames");
    events.extend(s.finish().unwrap());
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].filter_lag_ms, 10.0);
    assert_eq!(events[0].t, seq.frames[39].t);
}

#[test]
fn one_decision_per_forty_accepted_frames() {
    for n in [0, 1, 39, 40, 79, 80, 81, 333, 2000] {
        let seq = noise_sequence(n, n as u64);
        let mut s = DetectorSession::new(small_model(1), SessionOptions::default()).unwrap();
        let events = run_sequence(&mut s, &seq, Pace::Accelerated).unwrap();
        assert_eq!(events.len(), n / 40, "{n} frames");
        assert!(events.windows(2).all(|w| w[0].t < w[1].t));
        assert!(s.buffered() < 40);
    }
}

/// The offline chain: whole-sequence median, windows, ensemble.
fn batch_decisions(model: &EnsembleModel, seq: &TactileSequence) -> (Vec<f64>, Vec<f64>, Vec<WindowLabel>) {
    let prepared = prepare_unlabeled(seq, DEFAULT_MEDIAN_WINDOW).unwrap();
    let flat: Vec<f64> = prepared.windows.iter().flat_map(|w| w.features.clone()).collect();
    let x = Array2::from_shape_vec((prepared.len(), 720), flat).unwrap();
    let d = model.forward(x.view()).unwrap();
    (prepared.end_times(), d.iter().map(|d| d.mean).collect(), d.iter().map(|d| d.decision).collect())
}

#[test]
fn streaming_equals_batch_bit_for_bit() {
    let model = small_model(3);
    let mut s = DetectorSession::new(model.clone(), SessionOptions::default()).unwrap();
    let mut sequences = sim_sequences();
    sequences.push(noise_sequence(517, 9));
    for seq in &sequences {
        let events = run_sequence(&mut s, seq, Pace::Accelerated).unwrap();
        let (times, means, labels) = batch_decisions(&model, seq);
        assert_eq!(events.len(), times.len());
        for (k, e) in events.iter().enumerate() {
            assert_eq!(e.t.to_bits(), times[k].to_bits());
            assert_eq!(e.p_mean.to_bits(), means[k].to_bits());
            assert_eq!(e.decision, labels[k]);
        }
    }
}

#[test]
fn causal_mode_has_no_lag() {
    let opts = SessionOptions { mode: MedianMode::Causal, ..Default::default() };
    let mut s = DetectorSession::new(small_model(1), opts).unwrap();
    let seq = noise_sequence(120, 2);
    let events = run_sequence(&mut s, &seq, Pace::Accelerated).unwrap();
    assert_eq!(events.len(), 3);
    assert!(events.iter().all(|e| e.filter_lag_ms == 0.0));
}

#[test]
fn out_of_order_frames_are_rejected_and_logged() {
    let seq = noise_sequence(200, 3);
    let mut clean = DetectorSession::new(small_model(2), SessionOptions::default()).unwrap();
    let expect = run_sequence(&mut clean, &seq, Pace::Accelerated).unwrap();

    let mut s = DetectorSession::new(small_model(2), SessionOptions::default()).unwrap();
    let mut events = Vec::new();
    for (i, f) in seq.frames.iter().enumerate() {
        events.extend(s.push_frame(*f).unwrap());
        if i == 57 {
            let stale = PillarFrame { t: f.t, ..*f };
            assert!(matches!(s.push_frame(stale), Err(RuntimeError::OutOfOrder { .. })));
            let back = PillarFrame { t: f.t - 0.01, ..*f };
            assert!(s.push_frame(back).is_err());
            let mut bad = seq.frames[i + 1];
            bad.forces[2][0] = f64::NAN;
            assert!(matches!(s.push_frame(bad), Err(RuntimeError::NonFiniteFrame { .. })));
        }
    }
    events.extend(s.finish().unwrap());
    assert_eq!(strip(&events), strip(&expect));
    let errors = s.log().iter().filter(|e| matches!(e, LogEntry::Error(_))).count();
    assert_eq!(errors, 3);
    assert_eq!(s.accepted(), 200);
}

#[test]
fn reset_restarts_and_keeps_the_log() {
    let seq = noise_sequence(300, 4);
    let mut fresh = DetectorSession::new(small_model(2), SessionOptions::default()).unwrap();
    let reference = run_sequence(&mut fresh, &seq, Pace::Accelerated).unwrap();

    let mut s = DetectorSession::new(small_model(2), SessionOptions::default()).unwrap();
    let other = noise_sequence(170, 5);
    let before: Vec<_> = other.frames.iter().filter_map(|f| s.push_frame(*f).unwrap()).collect();
    let logged = s.log().len();
    assert_eq!(logged, before.len());
    s.reset();
    s.reset();
    assert_eq!(s.log().len(), logged);
    let mut after: Vec<_> = seq.frames.iter().filter_map(|f| s.push_frame(*f).unwrap()).collect();
    after.extend(s.finish().unwrap());
    assert_eq!(strip(&after), strip(&reference));
    assert_eq!(s.log().len(), logged + after.len());
}

#[test]
fn slow_windows_are_flagged_not_dropped() {
    let clock = StepClock { now: Cell::new(Duration::ZERO), step: Duration::from_millis(30) };
    let mut s = DetectorSession::with_clock(small_model(1), SessionOptions::default(), clock).unwrap();
    let events = run_sequence(&mut s, &noise_sequence(200, 6), Pace::Accelerated).unwrap();
    assert_eq!(events.len(), 5);
    assert!(events.iter().all(|e| e.deadline_miss && (e.compute_ms - 30.0).abs() < 1e-9));

    let quick = StepClock { now: Cell::new(Duration::ZERO), step: Duration::from_millis(25) };
    let mut s = DetectorSession::with_clock(small_model(1), SessionOptions::default(), quick).unwrap();
    let events = run_sequence(&mut s, &noise_sequence(80, 6), Pace::Accelerated).unwrap();
    assert!(events.iter().all(|e| !e.deadline_miss), "the budget itself is not a miss");
}

#[test]
fn run_file_counts_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    save_dataset(&empty, &[]).unwrap();
    let mut s = DetectorSession::new(small_model(1), SessionOptions::default()).unwrap();
    let log = run_file(&mut s, &empty, Pace::Accelerated).unwrap();
    assert!(log.sequences.is_empty());
    assert_eq!(log.stats.windows, 0);

    let two = dir.path().join("two.jsonl");
    save_dataset(&two, &[noise_sequence(2000, 7), noise_sequence(0, 7)]).unwrap();
    let log = run_file(&mut s, &two, Pace::Accelerated).unwrap();
    assert_eq!(log.sequences[0].events.len(), 50);
    assert!(log.sequences[1].events.is_empty());
    assert_eq!(log.stats.windows, 50);
    assert!(log.stats.p99_ms >= log.stats.p50_ms && log.stats.max_ms >= log.stats.p99_ms);
}

#[test]
fn real_time_pace_takes_wall_time() {
    let mut s = DetectorSession::new(small_model(1), SessionOptions::default()).unwrap();
    let start = std::time::Instant::now();
    let events = run_sequence(&mut s, &noise_sequence(100, 8), Pace::RealTime { speedup: 2.0 }).unwrap();
    assert_eq!(events.len(), 2);
    assert!(start.elapsed() >= Duration::from_millis(45));
}

#[test]
fn line_input_matches_recorded_replay() {
    let seq = noise_sequence(250, 10);
    let mut s = DetectorSession::new(small_model(2), SessionOptions::default()).unwrap();
    let expect = run_sequence(&mut s, &seq, Pace::Accelerated).unwrap();

    let mut text = String::new();
    for (i, f) in seq.frames.iter().enumerate() {
        text.push_str(&serde_json::to_string(&f.to_row().to_vec()).unwrap());
        text.push('\n');
        if i == 100 {
            text.push_str("not a frame\n\n[1, 2]\n");
        }
    }
    let mut s = DetectorSession::new(small_model(2), SessionOptions::default()).unwrap();
    let mut out = Vec::new();
    let stats = run_lines(&mut s, Cursor::new(text), &mut out, 4).unwrap();
    assert_eq!(stats.windows, expect.len());
    let lines: Vec<serde_json::Value> = String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let errors: Vec<_> = lines.iter().filter(|v| v.get("error").is_some()).collect();
    assert_eq!(errors.len(), 2);
    let decisions: Vec<_> = lines.iter().filter(|v| v.get("decision").is_some()).collect();
    assert_eq!(decisions.len(), expect.len());
    for (v, e) in decisions.iter().zip(&expect) {
        assert_eq!(v["p_mean"].as_f64().unwrap().to_bits(), e.p_mean.to_bits());
        assert_eq!(v["t"].as_f64().unwrap(), e.t);
        assert_eq!(v["filter_lag_ms"].as_f64().unwrap(), 10.0);
        for key in ["compute_ms", "deadline_miss", "decision"] {
            assert!(v.get(key).is_some());
        }
    }
}
