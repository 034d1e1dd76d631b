//! Trains the remedy-augmented arm for one seed and scores it against a
//! plain model on the shifted test set.
//!
//! Usage: `ablation_probe <epochs> <seed> <plain.json> <augmented.json>`.
//! Model files that exist are loaded; missing ones are trained and saved.

use std::path::Path;

use tactislip_core::AugmentationConfig;
use tactislip_eval::recipe::{augment_tagged, build_data, train_model, RecipeConfig};
use tactislip_eval::{ablation_compare, shifted_test_set};
use tactislip_nn::EnsembleModel;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs: usize = args[0].parse().unwrap();
    let seed: u64 = args[1].parse().unwrap();
    let mut cfg = RecipeConfig::with_master_seed(seed);
    cfg.ensemble.train.epochs = epochs;
    let data = build_data(&cfg).unwrap();
    let model = |path: &str, train: &dyn Fn() -> Vec<tactislip_core::LabeledSequence>| {
        if Path::new(path).exists() {
            EnsembleModel::load(path).unwrap()
        } else {
            let m = train_model(&train(), &cfg.ensemble).unwrap();
            m.save(path).unwrap();
            m
        }
    };
    let plain = model(&args[2], &|| data.train.clone());
    let remedies = AugmentationConfig { rng_seed: cfg.train_augmentation.rng_seed, ..AugmentationConfig::default() };
    let augmented = model(&args[3], &|| augment_tagged(&data.train_raw, &remedies).unwrap());
    let shifted = shifted_test_set(&data.test_raw, cfg.test_augmentation.rng_seed).unwrap();
    let result = ablation_compare(&augmented, &plain, &shifted).unwrap();
    println!("{}", serde_json::to_string(&result).unwrap());
    println!("remedies help: {}", result.remedies_help());
}
