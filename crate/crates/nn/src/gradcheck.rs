//! Analytic gradients against central finite differences.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use tactislip_core::seed::rng_from_seed;

use crate::network::{BackwardOptions, Network};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    /// Parameters to check; when at least the parameter count, every
    /// scalar is checked.
    pub samples: usize,
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so gradients that
    /// are zero up to rounding do not divide by zero.
    pub denominator_floor: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub options: BackwardOptions,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            samples: 200,
            tolerance: 1e-4,
            denominator_floor: 1e-6,
            weight_decay: 0.0,
            seed: 0,
            options: BackwardOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub tensor: String,
    pub index: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Draws discarded because the ±ε perturbation flipped a rectifier.
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    pub worst: Option<ParamCheck>,
    /// Largest relative error per tensor that was sampled.
    pub per_tensor: Vec<(String, f64)>,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Checks the network's own backward pass on one batch.
pub fn gradient_check(net: &Network, seqs: &[ArrayView2<f64>], labels: &[&[usize]], config: &GradCheckConfig) -> Result<GradCheckReport> {
    let (_, grads, _) = net.loss_and_grads(seqs, labels, config.weight_decay, config.options)?;
    compare_gradients(net, seqs, labels, &grads, config)
}

/// Checks externally supplied gradients against finite differences of the
/// training objective.
pub fn compare_gradients(
    net: &Network,
    seqs: &[ArrayView2<f64>],
    labels: &[&[usize]],
    analytic: &[Array2<f64>],
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let total = net.layout.scalar_count();
    let exhaustive = config.samples >= total;
    let mut rng = rng_from_seed(config.seed);
    let mut probe = net.clone();
    let base_signature = net.forward_train(seqs)?.relu_signature();

    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    if exhaustive {
        for (t, spec) in net.layout.specs.iter().enumerate() {
            for i in 0..spec.shape.0 {
                for j in 0..spec.shape.1 {
                    candidates.push((t, i, j));
                }
            }
        }
    }
    let max_draws = if exhaustive { candidates.len() } else { config.samples * 20 };

    let mut checks = Vec::new();
    let mut skipped = 0;
    let mut draws = 0;
    while checks.len() < config.samples.min(total) && draws < max_draws {
        let (t, i, j) = if exhaustive {
            candidates[draws]
        } else {
            let t = rng.random_range(0..net.layout.len());
            let (rows, cols) = net.layout.specs[t].shape;
            (t, rng.random_range(0..rows), rng.random_range(0..cols))
        };
        draws += 1;
        let original = probe.params[t][[i, j]];
        probe.params[t][[i, j]] = original + config.epsilon;
        let (plus, trace_plus) = probe.objective(seqs, labels, config.weight_decay)?;
        probe.params[t][[i, j]] = original - config.epsilon;
        let (minus, trace_minus) = probe.objective(seqs, labels, config.weight_decay)?;
        probe.params[t][[i, j]] = original;
        if trace_plus.relu_signature() != base_signature || trace_minus.relu_signature() != base_signature {
            skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * config.epsilon);
        let a = analytic[t][[i, j]];
        checks.push(ParamCheck {
            tensor: net.layout.specs[t].name.clone(),
            index: (i, j),
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric, config.denominator_floor),
        });
    }

    let mut per_tensor: Vec<(String, f64)> = Vec::new();
    for c in &checks {
        match per_tensor.iter_mut().find(|(n, _)| *n == c.tensor) {
            Some((_, e)) => *e = e.max(c.rel_error),
            None => per_tensor.push((c.tensor.clone(), c.rel_error)),
        }
    }
    let worst = checks.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error)).cloned();
    let max_rel_error = worst.as_ref().map_or(0.0, |w| w.rel_error);
    let passed = !checks.is_empty() && max_rel_error < config.tolerance;
    Ok(GradCheckReport { checked: checks.len(), skipped_kinks: skipped, max_rel_error, worst, per_tensor, passed })
}
