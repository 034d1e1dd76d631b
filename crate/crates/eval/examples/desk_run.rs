//! Trains the desk-scale recipe once and prints its metrics.
//!
//! Usage: `desk_run [epochs] [seed] [model.json]`. When the model file
//! exists it is loaded instead of retrained.

use std::path::PathBuf;
use std::time::Instant;

use tactislip_core::{prepare, WindowLabel};
use tactislip_eval::recipe::{build_data, evaluate_sets, train_model, RecipeConfig};
use tactislip_eval::metrics::percentile;
use tactislip_eval::Verdict;
use tactislip_nn::EnsembleModel;

fn main() {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let cache = args.next().map(PathBuf::from);
    let mut cfg = RecipeConfig::with_master_seed(seed);
    cfg.ensemble.train.epochs = epochs;
    let t = Instant::now();
    let data = build_data(&cfg).unwrap();
    println!("data {:.1}s: train {} test {}", t.elapsed().as_secs_f64(), data.train.len(), data.test.len());

    let t = Instant::now();
    let model = match &cache {
        Some(p) if p.exists() => EnsembleModel::load(p).unwrap(),
        _ => {
            let m = train_model(&data.train, &cfg.ensemble).unwrap();
            if let Some(p) = &cache {
                m.save(p).unwrap();
            }
            m
        }
    };
    println!("model {:.1}s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let report = evaluate_sets(&model, &data.test, &data.test_raw).unwrap();
    println!("eval {:.1}s", t.elapsed().as_secs_f64());
    for (name, r) in [("augmented", &report.augmented), ("raw", &report.raw)] {
        println!("{name}: {:?} success {:.3} stop-fa {:.3} latency {:?}", r.confusion, r.success_rate, r.stop_false_alarm_rate, r.latency);
    }
    for o in report.raw.outcomes.iter().filter(|o| !matches!(o.verdict, Verdict::TP | Verdict::TN)) {
        println!("  miss {} {:?} det {:?} interval {:?}..{:?}", o.id, o.verdict, o.detection_time, o.incipient_start, o.incipient_end);
    }

    // Best latency a window-end detector could reach on these labels.
    let mut oracle = Vec::new();
    let mut no_window = 0;
    for item in &data.test_raw {
        let Some(start) = item.annotation.incipient_start() else { continue };
        let p = prepare(item).unwrap();
        match p.windows.iter().find(|w| w.label == WindowLabel::Incipient) {
            Some(w) => oracle.push((w.window_end_t - start) * 1e3),
            None => no_window += 1,
        }
    }
    let median = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        (percentile(&v, 0.5), percentile(&v, 0.1))
    };
    let lengths: Vec<f64> = data
        .test_raw
        .iter()
        .filter_map(|i| Some((i.annotation.incipient_end()? - i.annotation.incipient_start()?) * 1e3))
        .collect();
    println!(
        "oracle latency median {:.1} ms over {} (no incipient window: {no_window}); interval length median {:.1} ms p10 {:.1}",
        median(&oracle).0,
        oracle.len(),
        median(&lengths).0,
        median(&lengths).1
    );
    let lat: Vec<f64> = report.raw.outcomes.iter().filter_map(|o| o.latency()).map(|l| l * 1e3).collect();
    let mut sorted = lat.clone();
    sorted.sort_by(f64::total_cmp);
    println!("raw latencies ms: {:?}", sorted.iter().map(|v| v.round() as i64).collect::<Vec<_>>());
}
