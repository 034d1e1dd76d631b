//! Encoder → GRU → estimator forward passes and backpropagation through
//! time.
//!
//! Training batches hold whole sequences. Windows are stacked time-major
//! with sequences sorted by decreasing length, so the rows active at step
//! `t` form one contiguous block and the previous hidden state of block
//! row `i` is row `i` of the previous block.

use std::hash::{DefaultHasher, Hash, Hasher};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::config::NetworkConfig;
use crate::ops::{
    batchnorm_backward, batchnorm_eval, batchnorm_train, bce_loss, relu_backward_inplace, relu_inplace, sigmoid,
    softmax_rows, BnCache,
};
use crate::params::{init_params, BnStats, Layout, TensorKind};
use crate::{NnError, Result};

/// A network's parameters and running batch-norm statistics. The initial
/// hidden state is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub layout: Layout,
    pub params: Vec<Array2<f64>>,
    pub bn: BnStats,
}

/// Gate activations of one GRU step, one row per sequence.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub z: Array2<f64>,
    pub r: Array2<f64>,
    pub candidate: Array2<f64>,
    pub h: Array2<f64>,
}

/// Row bookkeeping for a training batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchLayout {
    /// Sequence indices by decreasing length (stable).
    pub order: Vec<usize>,
    pub block_start: Vec<usize>,
    pub block_len: Vec<usize>,
    /// `(sequence, window)` of every stacked row.
    pub rows: Vec<(usize, usize)>,
}

impl BatchLayout {
    pub fn new(lens: &[usize]) -> Self {
        let mut order: Vec<usize> = (0..lens.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(lens[i]));
        let steps = order.first().map_or(0, |&i| lens[i]);
        let mut block_start = Vec::with_capacity(steps);
        let mut block_len = Vec::with_capacity(steps);
        let mut rows = Vec::new();
        for t in 0..steps {
            block_start.push(rows.len());
            let active = order.iter().take_while(|&&i| lens[i] > t).count();
            block_len.push(active);
            rows.extend(order[..active].iter().map(|&i| (i, t)));
        }
        Self { order, block_start, block_len, rows }
    }

    pub fn steps(&self) -> usize {
        self.block_len.len()
    }
}

#[derive(Debug, Clone)]
struct DenseBn {
    input: Array2<f64>,
    bn: BnCache,
    act: Array2<f64>,
}

/// Values retained from a training-mode forward pass for BPTT.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub layout: BatchLayout,
    encoder: DenseBn,
    e: Array2<f64>,
    hprev: Array2<f64>,
    pub z: Array2<f64>,
    pub r: Array2<f64>,
    pub candidate: Array2<f64>,
    /// Hidden state after every window.
    pub h: Array2<f64>,
    estimator: Vec<DenseBn>,
    pub logits: Array2<f64>,
    /// Class probabilities per stacked row.
    pub probs: Array2<f64>,
}

impl ForwardTrace {
    /// Probabilities of sequence `seq`, in window order.
    pub fn probs_of(&self, seq: usize) -> Vec<[f64; 2]> {
        let mut out: Vec<(usize, [f64; 2])> = self
            .layout
            .rows
            .iter()
            .enumerate()
            .filter(|(_, (s, _))| *s == seq)
            .map(|(row, &(_, t))| (t, [self.probs[[row, 0]], self.probs[[row, 1]]]))
            .collect();
        out.sort_by_key(|&(t, _)| t);
        out.into_iter().map(|(_, p)| p).collect()
    }

    /// Batch mean and biased variance of every batch-norm layer.
    pub fn bn_batch_stats(&self) -> Vec<(Array1<f64>, Array1<f64>)> {
        std::iter::once(&self.encoder)
            .chain(&self.estimator)
            .map(|l| (l.bn.mean.clone(), l.bn.var.clone()))
            .collect()
    }

    /// Hash of every rectifier's on/off state; two passes with equal
    /// signatures lie in the same piecewise-smooth region.
    pub fn relu_signature(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        for layer in std::iter::once(&self.encoder).chain(&self.estimator) {
            for chunk in layer.act.as_slice().expect("contiguous").chunks(64) {
                let bits = chunk.iter().enumerate().fold(0u64, |acc, (i, &v)| acc | (u64::from(v > 0.0) << i));
                bits.hash(&mut hasher);
            }
        }
        hasher.finish()
    }

    pub fn rows(&self) -> usize {
        self.layout.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackwardOptions {
    /// Propagate gradients through the recurrent connection. Disabling it
    /// truncates BPTT to a single step.
    pub through_time: bool,
}

impl Default for BackwardOptions {
    fn default() -> Self {
        Self { through_time: true }
    }
}

fn affine(x: ArrayView2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    if x.nrows() == 1 {
        // Streaming path: accumulate weight rows instead of packing the
        // whole matrix for a one-row product.
        let mut out = b.row(0).to_owned();
        for (&xi, row) in x.row(0).iter().zip(w.rows()) {
            if xi != 0.0 {
                out.scaled_add(xi, &row);
            }
        }
        return out.insert_axis(Axis(0));
    }
    x.dot(w) + &b.row(0)
}

fn check_finite(window: ArrayView1<f64>, index: usize) -> Result<()> {
    if window.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFiniteInput { window: index })
    }
}

impl Network {
    pub fn new<R: Rng>(config: NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let params = init_params(&layout, rng);
        let bn = BnStats::new(&config);
        Ok(Self { config, layout, params, bn })
    }

    pub fn from_parts(config: NetworkConfig, params: Vec<Array2<f64>>, bn: BnStats) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.len() {
            return Err(NnError::Format(format!("expected {} tensors, got {}", layout.len(), params.len())));
        }
        for (spec, p) in layout.specs.iter().zip(&params) {
            if p.dim() != spec.shape {
                return Err(NnError::Format(format!("{}: shape {:?}, expected {:?}", spec.name, p.dim(), spec.shape)));
            }
        }
        let expected = BnStats::new(&config);
        let shapes_match = |a: &[Array1<f64>], b: &[Array1<f64>]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len());
        if !shapes_match(&bn.mean, &expected.mean) || !shapes_match(&bn.var, &expected.var) {
            return Err(NnError::Format("batch-norm statistics do not match the configuration".into()));
        }
        Ok(Self { config, layout, params, bn })
    }

    fn p(&self, i: usize) -> &Array2<f64> {
        &self.params[i]
    }

    fn vec(&self, i: usize) -> ArrayView1<'_, f64> {
        self.params[i].row(0)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|v| v.is_finite()))
            && self.bn.mean.iter().chain(&self.bn.var).all(|a| a.iter().all(|v| v.is_finite()))
    }

    // ---- evaluation mode -------------------------------------------------

    /// Encoder with running batch-norm statistics; one window per row.
    pub fn encoder_eval(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let l = self.layout.enc_hidden;
        let a = affine(x, self.p(l.w), self.p(l.b));
        let mut y = batchnorm_eval(a.view(), self.vec(l.gamma), self.vec(l.beta), &self.bn.mean[0], &self.bn.var[0]);
        relu_inplace(&mut y);
        affine(y.view(), self.p(self.layout.enc_w2), self.p(self.layout.enc_b2))
    }

    /// One GRU step for a batch of rows:
    /// `h = (1 − z)⊙h_prev + z⊙tanh(W_h x + U_h(r⊙h_prev) + b_h)`.
    pub fn gru_cell(&self, x: ArrayView2<f64>, h_prev: ArrayView2<f64>) -> GruStep {
        let xw = affine(x, self.p(self.layout.gru_w), self.p(self.layout.gru_b));
        self.gru_from_projection(xw.view(), h_prev)
    }

    fn gru_from_projection(&self, xw: ArrayView2<f64>, h_prev: ArrayView2<f64>) -> GruStep {
        let h = self.config.gru_hidden;
        let u = self.p(self.layout.gru_u);
        let hu = h_prev.dot(&u.slice(s![.., ..2 * h]));
        let z = (&xw.slice(s![.., ..h]) + &hu.slice(s![.., ..h])).mapv(sigmoid);
        let r = (&xw.slice(s![.., h..2 * h]) + &hu.slice(s![.., h..])).mapv(sigmoid);
        let rh = &r * &h_prev;
        let candidate = (&xw.slice(s![.., 2 * h..]) + &rh.dot(&u.slice(s![.., 2 * h..]))).mapv(f64::tanh);
        let mut out = h_prev.to_owned();
        Zip::from(&mut out).and(&z).and(&candidate).for_each(|o, &zv, &c| *o = (1.0 - zv) * *o + zv * c);
        GruStep { z, r, candidate, h: out }
    }

    /// Estimator with running batch-norm statistics; returns class
    /// probabilities per row.
    pub fn estimator_eval(&self, h: ArrayView2<f64>) -> Array2<f64> {
        let mut x = h.to_owned();
        for (l, layer) in self.layout.est.iter().enumerate() {
            let a = affine(x.view(), self.p(layer.w), self.p(layer.b));
            x = batchnorm_eval(a.view(), self.vec(layer.gamma), self.vec(layer.beta), &self.bn.mean[l + 1], &self.bn.var[l + 1]);
            relu_inplace(&mut x);
        }
        softmax_rows(&affine(x.view(), self.p(self.layout.out_w), self.p(self.layout.out_b)))
    }

    /// Advances one window in evaluation mode, updating `h` in place.
    /// Batch and streaming inference both go through here.
    pub fn step_eval(&self, window: ArrayView1<f64>, h: &mut Array1<f64>) -> Result<[f64; 2]> {
        self.step_eval_indexed(window, h, 0)
    }

    fn step_eval_indexed(&self, window: ArrayView1<f64>, h: &mut Array1<f64>, index: usize) -> Result<[f64; 2]> {
        if window.len() != self.config.input_dim {
            return Err(NnError::InvalidInput(format!("window has {} features, expected {}", window.len(), self.config.input_dim)));
        }
        check_finite(window, index)?;
        let e = self.encoder_eval(window.insert_axis(Axis(0)));
        let step = self.gru_cell(e.view(), h.view().insert_axis(Axis(0)));
        let p = self.estimator_eval(step.h.view());
        *h = step.h.row(0).to_owned();
        Ok([p[[0, 0]], p[[0, 1]]])
    }

    pub fn initial_state(&self) -> Array1<f64> {
        Array1::zeros(self.config.gru_hidden)
    }

    /// Evaluation-mode pass over one sequence from `h₀ = 0`.
    pub fn forward_eval(&self, windows: ArrayView2<f64>) -> Result<Vec<[f64; 2]>> {
        let mut h = self.initial_state();
        windows.rows().into_iter().enumerate().map(|(i, w)| self.step_eval_indexed(w, &mut h, i)).collect()
    }

    // ---- training mode ---------------------------------------------------

    /// Training-mode pass over a batch of sequences, using batch
    /// statistics. Running statistics are left untouched; apply
    /// [`ForwardTrace::bn_batch_stats`] with [`BnStats::update`].
    pub fn forward_train(&self, seqs: &[ArrayView2<f64>]) -> Result<ForwardTrace> {
        let mut offset = 0;
        for seq in seqs {
            if seq.ncols() != self.config.input_dim {
                return Err(NnError::InvalidInput(format!("windows have {} features, expected {}", seq.ncols(), self.config.input_dim)));
            }
            for (t, w) in seq.rows().into_iter().enumerate() {
                check_finite(w, offset + t)?;
            }
            offset += seq.nrows();
        }
        let lens: Vec<usize> = seqs.iter().map(|s| s.nrows()).collect();
        let layout = BatchLayout::new(&lens);
        let n = layout.rows.len();
        if n == 0 {
            return Err(NnError::InvalidInput("empty batch".into()));
        }
        let mut x = Array2::zeros((n, self.config.input_dim));
        for (row, &(seq, t)) in layout.rows.iter().enumerate() {
            x.row_mut(row).assign(&seqs[seq].row(t));
        }

        let l = self.layout.enc_hidden;
        let a = affine(x.view(), self.p(l.w), self.p(l.b));
        let (mut act, bn) = batchnorm_train(&a, self.vec(l.gamma), self.vec(l.beta));
        relu_inplace(&mut act);
        let e = affine(act.view(), self.p(self.layout.enc_w2), self.p(self.layout.enc_b2));
        let encoder = DenseBn { input: x, bn, act };

        let hd = self.config.gru_hidden;
        let xw = affine(e.view(), self.p(self.layout.gru_w), self.p(self.layout.gru_b));
        let mut hprev = Array2::zeros((n, hd));
        let mut z = Array2::zeros((n, hd));
        let mut r = Array2::zeros((n, hd));
        let mut candidate = Array2::zeros((n, hd));
        let mut h = Array2::zeros((n, hd));
        for t in 0..layout.steps() {
            let (start, m) = (layout.block_start[t], layout.block_len[t]);
            let rows = s![start..start + m, ..];
            if t > 0 {
                let prev = layout.block_start[t - 1];
                let previous = h.slice(s![prev..prev + m, ..]).to_owned();
                hprev.slice_mut(rows).assign(&previous);
            }
            let step = self.gru_from_projection(xw.slice(rows), hprev.slice(rows));
            z.slice_mut(rows).assign(&step.z);
            r.slice_mut(rows).assign(&step.r);
            candidate.slice_mut(rows).assign(&step.candidate);
            h.slice_mut(rows).assign(&step.h);
        }

        let mut estimator = Vec::with_capacity(self.layout.est.len());
        let mut input = h.clone();
        for layer in &self.layout.est {
            let a = affine(input.view(), self.p(layer.w), self.p(layer.b));
            let (mut act, bn) = batchnorm_train(&a, self.vec(layer.gamma), self.vec(layer.beta));
            relu_inplace(&mut act);
            let next = act.clone();
            estimator.push(DenseBn { input, bn, act });
            input = next;
        }
        let logits = affine(input.view(), self.p(self.layout.out_w), self.p(self.layout.out_b));
        let probs = softmax_rows(&logits);
        Ok(ForwardTrace { layout, encoder, e, hprev, z, r, candidate, h, estimator, logits, probs })
    }

    /// Class targets of every stacked row.
    pub fn row_targets(trace: &ForwardTrace, labels: &[&[usize]]) -> Result<Vec<usize>> {
        trace
            .layout
            .rows
            .iter()
            .map(|&(seq, t)| {
                labels
                    .get(seq)
                    .and_then(|l| l.get(t))
                    .copied()
                    .filter(|&c| c < 2)
                    .ok_or_else(|| NnError::InvalidInput(format!("missing or invalid label for sequence {seq}, window {t}")))
            })
            .collect()
    }

    /// `λ Σ‖W‖²` over weight matrices.
    pub fn l2_penalty(&self, weight_decay: f64) -> f64 {
        if weight_decay == 0.0 {
            return 0.0;
        }
        let sum: f64 = self
            .layout
            .specs
            .iter()
            .zip(&self.params)
            .filter(|(s, _)| s.kind == TensorKind::Weight)
            .map(|(_, p)| p.iter().map(|v| v * v).sum::<f64>())
            .sum();
        weight_decay * sum
    }

    /// Training objective: mean cross-entropy plus the L2 penalty.
    pub fn objective(&self, seqs: &[ArrayView2<f64>], labels: &[&[usize]], weight_decay: f64) -> Result<(f64, ForwardTrace)> {
        let trace = self.forward_train(seqs)?;
        let targets = Self::row_targets(&trace, labels)?;
        let (loss, _) = bce_loss(&trace.probs, &targets);
        Ok((loss + self.l2_penalty(weight_decay), trace))
    }

    /// Objective value and its gradient for every tensor.
    pub fn loss_and_grads(
        &self,
        seqs: &[ArrayView2<f64>],
        labels: &[&[usize]],
        weight_decay: f64,
        options: BackwardOptions,
    ) -> Result<(f64, Vec<Array2<f64>>, ForwardTrace)> {
        let trace = self.forward_train(seqs)?;
        let targets = Self::row_targets(&trace, labels)?;
        let (loss, dlogits) = bce_loss(&trace.probs, &targets);
        let mut grads = self.backward(&trace, &dlogits, options);
        self.add_weight_decay(&mut grads, weight_decay);
        Ok((loss + self.l2_penalty(weight_decay), grads, trace))
    }

    /// Adds `2λw` to the gradient of every weight matrix.
    pub fn add_weight_decay(&self, grads: &mut [Array2<f64>], weight_decay: f64) {
        if weight_decay == 0.0 {
            return;
        }
        for ((spec, g), p) in self.layout.specs.iter().zip(grads.iter_mut()).zip(&self.params) {
            if spec.kind == TensorKind::Weight {
                g.scaled_add(2.0 * weight_decay, p);
            }
        }
    }

    /// Gradients of a loss with logit gradient `dlogits` (one row per
    /// stacked row of `trace`).
    pub fn backward(&self, trace: &ForwardTrace, dlogits: &Array2<f64>, options: BackwardOptions) -> Vec<Array2<f64>> {
        let ly = &self.layout;
        let mut g = ly.zeros();
        let last_input = trace.estimator.last().map_or(&trace.h, |l| &l.act);
        g[ly.out_w] = last_input.t().dot(dlogits);
        g[ly.out_b] = dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut d = dlogits.dot(&self.p(ly.out_w).t());

        for (layer, cache) in ly.est.iter().zip(&trace.estimator).rev() {
            relu_backward_inplace(&mut d, &cache.act);
            let (dx, dgamma, dbeta) = batchnorm_backward(&d, &cache.bn, self.vec(layer.gamma));
            g[layer.gamma] = dgamma.insert_axis(Axis(0));
            g[layer.beta] = dbeta.insert_axis(Axis(0));
            g[layer.w] = cache.input.t().dot(&dx);
            g[layer.b] = dx.sum_axis(Axis(0)).insert_axis(Axis(0));
            d = dx.dot(&self.p(layer.w).t());
        }

        let hd = self.config.gru_hidden;
        let u = self.p(ly.gru_u);
        let u_zr_t = u.slice(s![.., ..2 * hd]).t().to_owned();
        let u_h_t = u.slice(s![.., 2 * hd..]).t().to_owned();
        let n = trace.rows();
        let mut da = Array2::zeros((n, 3 * hd));
        let mut carry: Option<Array2<f64>> = None;
        for t in (0..trace.layout.steps()).rev() {
            let (start, m) = (trace.layout.block_start[t], trace.layout.block_len[t]);
            let rows = s![start..start + m, ..];
            let mut dh = d.slice(rows).to_owned();
            if let Some(c) = carry.take() {
                let k = c.nrows();
                let mut head = dh.slice_mut(s![..k, ..]);
                head += &c;
            }
            let (z, r, cand, hp) = (trace.z.slice(rows), trace.r.slice(rows), trace.candidate.slice(rows), trace.hprev.slice(rows));
            let mut dhp = &dh * &z.mapv(|v| 1.0 - v);
            let da_h = Zip::from(&dh).and(&z).and(&cand).map_collect(|&g, &zv, &c| g * zv * (1.0 - c * c));
            let da_z = Zip::from(&dh).and(&z).and(&cand).and(&hp).map_collect(|&g, &zv, &c, &h| g * (c - h) * zv * (1.0 - zv));
            let d_rh = da_h.dot(&u_h_t);
            let da_r = Zip::from(&d_rh).and(&hp).and(&r).map_collect(|&g, &h, &rv| g * h * rv * (1.0 - rv));
            dhp += &(&d_rh * &r);
            {
                let mut block = da.slice_mut(rows);
                block.slice_mut(s![.., ..hd]).assign(&da_z);
                block.slice_mut(s![.., hd..2 * hd]).assign(&da_r);
                block.slice_mut(s![.., 2 * hd..]).assign(&da_h);
            }
            if options.through_time && t > 0 {
                dhp += &da.slice(s![start..start + m, ..2 * hd]).dot(&u_zr_t);
                carry = Some(dhp);
            }
        }
        g[ly.gru_w] = trace.e.t().dot(&da);
        g[ly.gru_b] = da.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut gu = Array2::zeros((hd, 3 * hd));
        gu.slice_mut(s![.., ..2 * hd]).assign(&trace.hprev.t().dot(&da.slice(s![.., ..2 * hd])));
        let rh = &trace.r * &trace.hprev;
        gu.slice_mut(s![.., 2 * hd..]).assign(&rh.t().dot(&da.slice(s![.., 2 * hd..])));
        g[ly.gru_u] = gu;
        let de = da.dot(&self.p(ly.gru_w).t());

        g[ly.enc_w2] = trace.encoder.act.t().dot(&de);
        g[ly.enc_b2] = de.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut d = de.dot(&self.p(ly.enc_w2).t());
        relu_backward_inplace(&mut d, &trace.encoder.act);
        let l = ly.enc_hidden;
        let (dx, dgamma, dbeta) = batchnorm_backward(&d, &trace.encoder.bn, self.vec(l.gamma));
        g[l.gamma] = dgamma.insert_axis(Axis(0));
        g[l.beta] = dbeta.insert_axis(Axis(0));
        g[l.w] = trace.encoder.input.t().dot(&dx);
        g[l.b] = dx.sum_axis(Axis(0)).insert_axis(Axis(0));
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_layout_is_time_major() {
        let layout = BatchLayout::new(&[2, 3, 1]);
        assert_eq!(layout.order, vec![1, 0, 2]);
        assert_eq!(layout.block_start, vec![0, 3, 5]);
        assert_eq!(layout.block_len, vec![3, 2, 1]);
        assert_eq!(layout.rows, vec![(1, 0), (0, 0), (2, 0), (1, 1), (0, 1), (1, 2)]);
    }

    #[test]
    fn empty_layout() {
        let layout = BatchLayout::new(&[]);
        assert_eq!(layout.steps(), 0);
    }
}
