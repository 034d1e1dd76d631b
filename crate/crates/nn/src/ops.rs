//! Elementwise functions, softmax, cross-entropy and batch normalization.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

/// Variance floor inside batch normalization.
pub const BN_EPS: f64 = 1e-5;
/// Probabilities are clipped here before taking logs.
pub const PROB_CLIP: f64 = 1e-12;

/// Logistic function without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean of `−ln max(p[true], 1e-12)` over rows and its gradient with
/// respect to the logits, `(p − onehot) / n`.
pub fn bce_loss(probs: &Array2<f64>, targets: &[usize]) -> (f64, Array2<f64>) {
    let n = probs.nrows();
    assert_eq!(n, targets.len(), "one target per row");
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        loss -= probs[[i, y]].max(PROB_CLIP).ln();
        grad[[i, y]] -= 1.0;
    }
    let scale = 1.0 / n.max(1) as f64;
    grad.mapv_inplace(|g| g * scale);
    (loss * scale, grad)
}

/// Cached values of a training-mode batch-norm pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub mean: Array1<f64>,
    /// Biased batch variance.
    pub var: Array1<f64>,
}

/// Normalizes with batch statistics, then applies `γ·x̂ + β`.
pub fn batchnorm_train(x: &Array2<f64>, gamma: ArrayView1<f64>, beta: ArrayView1<f64>) -> (Array2<f64>, BnCache) {
    let n = x.nrows() as f64;
    let mean = x.sum_axis(Axis(0)) / n;
    let centered = x - &mean;
    let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let xhat = centered * &inv_std;
    let y = &xhat * &gamma + &beta;
    (y, BnCache { xhat, inv_std, mean, var })
}

/// Normalizes with running statistics.
pub fn batchnorm_eval(
    x: ArrayView2<f64>,
    gamma: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    mean: &Array1<f64>,
    var: &Array1<f64>,
) -> Array2<f64> {
    let scale = Zip::from(gamma).and(var).map_collect(|&g, &v| g / (v + BN_EPS).sqrt());
    let shift = Zip::from(beta).and(mean).and(&scale).map_collect(|&b, &m, &s| b - m * s);
    &x * &scale + &shift
}

/// Gradients `(dx, dγ, dβ)` of a training-mode batch-norm pass.
pub fn batchnorm_backward(dy: &Array2<f64>, cache: &BnCache, gamma: ArrayView1<f64>) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let n = dy.nrows() as f64;
    let dbeta = dy.sum_axis(Axis(0));
    let dgamma = (dy * &cache.xhat).sum_axis(Axis(0));
    let dxhat = dy * &gamma;
    let sum_dxhat = dxhat.sum_axis(Axis(0));
    let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
    let mut dx = dxhat * n - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat;
    dx *= &(&cache.inv_std / n);
    (dx, dgamma, dbeta)
}

pub fn relu_inplace(x: &mut Array2<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

/// Zeroes `grad` where the rectifier output was zero.
pub fn relu_backward_inplace(grad: &mut Array2<f64>, activation: &Array2<f64>) {
    Zip::from(grad).and(activation).for_each(|g, &a| {
        if a <= 0.0 {
            *g = 0.0
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_basics() {
        let p = softmax_rows(&array![[0.0, 0.0], [50.0, -50.0], [1.0, 3.0]]);
        assert_eq!(p.row(0).to_vec(), vec![0.5, 0.5]);
        assert!(p[[1, 1]] < 1e-20 && (p[[1, 0]] - 1.0).abs() < 1e-20);
        let shifted = softmax_rows(&array![[101.0, 103.0]]);
        assert!((shifted[[0, 0]] - p[[2, 0]]).abs() < 1e-15);
    }

    #[test]
    fn softmax_sums_to_one_on_range() {
        for a in (-100..=100).step_by(7) {
            for b in (-100..=100).step_by(11) {
                let p = softmax_rows(&array![[a as f64, b as f64]]);
                assert!((p.sum() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bce_values() {
        let (l, _) = bce_loss(&array![[1.0, 0.0]], &[0]);
        assert_eq!(l, 0.0);
        let (l, g) = bce_loss(&array![[0.5, 0.5], [0.5, 0.5]], &[0, 1]);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g, array![[-0.25, 0.25], [0.25, -0.25]]);
        let (l, _) = bce_loss(&array![[0.0, 1.0]], &[0]);
        assert!((l - 1e12f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn batchnorm_train_standardizes() {
        let x = array![[1.0, -3.0], [2.0, 5.0], [7.0, 0.5], [0.0, 1.0]] * 10.0;
        let ones = Array1::ones(2);
        let zeros = Array1::zeros(2);
        let (y, _) = batchnorm_train(&x, ones.view(), zeros.view());
        for col in y.columns() {
            let m = col.mean().unwrap();
            let v = col.mapv(|a| (a - m).powi(2)).mean().unwrap();
            assert!(m.abs() < 1e-6);
            assert!((v - 1.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn batchnorm_eval_identity_and_affine() {
        let x = array![[0.3, -2.0]];
        let ones = Array1::ones(2);
        let zeros = Array1::zeros(2);
        let y = batchnorm_eval(x.view(), ones.view(), zeros.view(), &zeros, &(&ones - BN_EPS));
        assert!((&y - &x).iter().all(|d| d.abs() < 1e-15));
        let mean = array![1.0, 2.0];
        let var = array![4.0, 9.0];
        let gamma = array![2.0, 0.5];
        let beta = array![0.1, -0.1];
        let y = batchnorm_eval(x.view(), gamma.view(), beta.view(), &mean, &var);
        let expect = |i: usize| gamma[i] * (x[[0, i]] - mean[i]) / (var[i] + BN_EPS).sqrt() + beta[i];
        assert!((y[[0, 0]] - expect(0)).abs() < 1e-15 && (y[[0, 1]] - expect(1)).abs() < 1e-15);
    }
}
