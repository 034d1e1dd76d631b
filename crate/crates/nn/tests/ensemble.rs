use ndarray::Array2;
use rand::Rng;
use tactislip_core::seed::{derive_seed, rng_from_seed};
use tactislip_core::WindowLabel;
use tactislip_nn::ensemble::{train_member, Bagging, EnsembleModel};
use tactislip_nn::train::TrainSequence;
use tactislip_nn::{aggregate_decide, train_ensemble, EnsembleConfig, NetworkConfig, NnError, TrainConfig};

/// Every multiset of `z` probabilities on the 0.05 grid, as counts of 0.05.
fn multisets(z: usize, max: u32, out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, lo: u32) {
    if current.len() == z {
        out.push(current.clone());
        return;
    }
    for k in lo..=max {
        current.push(k);
        multisets(z, max, out, current, k);
        current.pop();
    }
}

#[test]
fn grid_decisions_match_integer_oracle() {
    for z in 1..=6 {
        let mut all = Vec::new();
        multisets(z, 20, &mut all, &mut Vec::new(), 0);
        for ks in all {
            // The mean exceeds one half iff the counts sum past 10 z.
            let expect = if ks.iter().sum::<u32>() > 10 * z as u32 { WindowLabel::Incipient } else { WindowLabel::Other };
            let probs: Vec<f64> = ks.iter().map(|&k| f64::from(k) / 20.0).collect();
            assert_eq!(aggregate_decide(&probs, 0.5).unwrap(), expect, "{ks:?}");
            let reversed: Vec<f64> = probs.iter().rev().copied().collect();
            assert_eq!(aggregate_decide(&reversed, 0.5).unwrap(), expect);
        }
    }
}

fn toy_data(seed: u64, sequences: usize) -> Vec<TrainSequence> {
    let mut rng = rng_from_seed(seed);
    (0..sequences)
        .map(|_| {
            let n = rng.random_range(3..9);
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let windows = Array2::from_shape_fn((n, 4), |(t, c)| {
                let shift = if c == 0 && labels[t] == 0 { 0.8 } else { 0.0 };
                shift + rng.random_range(-1.0..1.0)
            });
            TrainSequence::new(windows, labels).unwrap()
        })
        .collect()
}

fn toy_config(members: usize, seed: u64) -> EnsembleConfig {
    EnsembleConfig {
        members,
        lambda: 0.4,
        threshold: 0.5,
        bagging: Bagging::PerEpoch,
        network: NetworkConfig::toy(),
        train: TrainConfig { lr: 0.01, batch_windows: 16, epochs: 4, seed, ..TrainConfig::default() },
    }
}

fn probe_windows() -> Array2<f64> {
    let mut rng = rng_from_seed(99);
    Array2::from_shape_fn((12, 4), |_| rng.random_range(-1.5..1.5))
}

#[test]
fn training_is_deterministic_and_members_differ() {
    let data = toy_data(1, 10);
    let a = train_ensemble(&data, None, &toy_config(3, 7)).unwrap();
    let b = train_ensemble(&data, None, &toy_config(3, 7)).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_ne!(a.members[0].params, a.members[1].params);
    assert_ne!(a.members[1].params, a.members[2].params);
    let c = train_ensemble(&data, None, &toy_config(3, 8)).unwrap();
    assert_ne!(a.members[0].params, c.members[0].params);
    for (z, p) in a.provenance.iter().enumerate() {
        assert_eq!(p.as_ref().unwrap().seed, derive_seed(7, z as u64));
    }
}

#[test]
fn single_member_ensemble_equals_one_network() {
    let data = toy_data(2, 8);
    let cfg = toy_config(1, 11);
    let model = train_ensemble(&data, None, &cfg).unwrap();
    let train = TrainConfig { seed: derive_seed(11, 0), ..cfg.train.clone() };
    let member = train_member(&data, &cfg.network, &train, cfg.lambda, cfg.bagging, None).unwrap();
    assert_eq!(model.members[0], member.network);
    let x = probe_windows();
    let probs = member.network.forward_eval(x.view()).unwrap();
    for (d, p) in model.forward(x.view()).unwrap().iter().zip(&probs) {
        assert_eq!(d.mean, p[0]);
        assert_eq!(d.decision == WindowLabel::Incipient, p[0] > 0.5);
    }
}

#[test]
fn identical_members_reduce_to_one() {
    let data = toy_data(3, 8);
    let one = train_ensemble(&data, None, &toy_config(1, 5)).unwrap();
    let net = one.members[0].clone();
    let many = EnsembleModel::new(vec![net.clone(); 5], vec![None; 5], 0.5, 0.4, 5).unwrap();
    let x = probe_windows();
    for (a, b) in many.forward(x.view()).unwrap().iter().zip(one.forward(x.view()).unwrap()) {
        assert!((a.mean - b.mean).abs() <= f64::EPSILON * b.mean);
        assert_eq!(a.decision, b.decision);
    }
}

#[test]
fn member_order_does_not_matter() {
    let data = toy_data(4, 10);
    let model = train_ensemble(&data, None, &toy_config(4, 21)).unwrap();
    let mut members = model.members.clone();
    members.reverse();
    members.swap(0, 2);
    let shuffled = EnsembleModel::new(members, vec![None; 4], 0.5, 0.4, 21).unwrap();
    let x = probe_windows();
    for (a, b) in model.forward(x.view()).unwrap().iter().zip(shuffled.forward(x.view()).unwrap()) {
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.decision, b.decision);
    }
}

#[test]
fn save_and_load_keep_decisions_bit_identical() {
    let data = toy_data(5, 10);
    let model = train_ensemble(&data, None, &toy_config(3, 13)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ensemble.json");
    model.save(&path).unwrap();
    let back = EnsembleModel::load(&path).unwrap();
    assert_eq!(back, model);
    let x = probe_windows();
    assert_eq!(model.forward(x.view()).unwrap(), back.forward(x.view()).unwrap());

    let text = std::fs::read_to_string(&path).unwrap();
    let bumped = text.replacen("\"format_version\":1", "\"format_version\":9", 1);
    assert!(matches!(EnsembleModel::from_json(&bumped), Err(NnError::UnsupportedVersion { found: 9, .. })));
    assert!(matches!(EnsembleModel::from_json(&text[..text.len() - 40]), Err(NnError::Json(_))));
}

#[test]
fn full_bag_on_one_sequence_trains() {
    let data = toy_data(6, 1);
    let cfg = EnsembleConfig { lambda: 1.0, ..toy_config(2, 3) };
    let model = train_ensemble(&data, None, &cfg).unwrap();
    assert_eq!(model.members.len(), 2);
    assert!(model.members.iter().all(|m| m.all_finite()));
}

#[test]
fn per_step_bagging_and_validation_checkpoint() {
    let data = toy_data(7, 10);
    let val = toy_data(8, 4);
    let cfg = toy_config(1, 17);
    let train = TrainConfig { seed: 17, ..cfg.train.clone() };
    let member = train_member(&data, &cfg.network, &train, 0.4, Bagging::PerStep, Some(&val)).unwrap();
    assert_eq!(member.history.len(), 4);
    let best = member.history.iter().filter_map(|h| h.validation_loss).fold(f64::INFINITY, f64::min);
    let kept = tactislip_nn::train::evaluate_loss(&member.network, &val).unwrap();
    assert_eq!(kept, best);
}

#[test]
fn invalid_configurations_are_rejected() {
    let data = toy_data(9, 3);
    assert!(train_ensemble(&data, None, &toy_config(0, 1)).is_err());
    assert!(train_ensemble(&data, None, &EnsembleConfig { lambda: 0.0, ..toy_config(1, 1) }).is_err());
    assert!(train_ensemble(&data, None, &EnsembleConfig { threshold: 1.0, ..toy_config(1, 1) }).is_err());
    let empty = vec![TrainSequence::new(Array2::zeros((0, 4)), vec![]).unwrap()];
    assert!(train_ensemble(&empty, None, &toy_config(1, 1)).is_err());
}
