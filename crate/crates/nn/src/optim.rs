//! Stochastic gradient descent with momentum.

use ndarray::Array2;

/// `v ← μ·v + g`, `w ← w − lr·v`, with velocities starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    pub velocity: Vec<Array2<f64>>,
}

impl SgdMomentum {
    pub fn new(params: &[Array2<f64>], lr: f64, momentum: f64) -> Self {
        Self { lr, momentum, velocity: params.iter().map(|p| Array2::zeros(p.raw_dim())).collect() }
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        assert_eq!(params.len(), grads.len());
        for ((w, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grads) {
            v.zip_mut_with(g, |v, &g| *v = self.momentum * *v + g);
            w.scaled_add(-self.lr, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = vec![array![[1.0, -2.0]]];
        let mut opt = SgdMomentum::new(&params, 1e-3, 0.95);
        opt.step(&mut params, &[array![[0.0, 0.0]]]);
        assert_eq!(params[0], array![[1.0, -2.0]]);
    }

    #[test]
    fn velocity_follows_geometric_series() {
        let mut params = vec![array![[0.0]]];
        let mut opt = SgdMomentum::new(&params, 1e-3, 0.95);
        let g = 0.7;
        for k in 1..=30 {
            opt.step(&mut params, &[array![[g]]]);
            let closed = g * (1.0 - 0.95f64.powi(k)) / 0.05;
            assert!((opt.velocity[0][[0, 0]] - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn update_is_linear_in_lr() {
        let grads = [array![[0.3, -0.1]]];
        let run = |lr: f64| {
            let mut p = vec![array![[0.0, 0.0]]];
            let mut opt = SgdMomentum::new(&p, lr, 0.95);
            opt.step(&mut p, &grads);
            opt.step(&mut p, &grads);
            p[0].clone()
        };
        let (a, b) = (run(1e-3), run(2e-3));
        assert!((&b - &(&a * 2.0)).iter().all(|d| d.abs() < 1e-18));
    }
}
