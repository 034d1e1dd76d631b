//! Straight-line scalar reimplementation of the network, used as an
//! independent oracle for the matrix code.

#![allow(dead_code)]

use tactislip_nn::ops::BN_EPS;
use tactislip_nn::Network;

fn at(net: &Network, t: usize, i: usize, j: usize) -> f64 {
    net.params[t][[i, j]]
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dense(net: &Network, w: usize, b: usize, x: &[f64]) -> Vec<f64> {
    let (n_in, n_out) = net.params[w].dim();
    assert_eq!(x.len(), n_in);
    (0..n_out)
        .map(|j| {
            let mut acc = at(net, b, 0, j);
            for (i, xi) in x.iter().enumerate() {
                acc += xi * at(net, w, i, j);
            }
            acc
        })
        .collect()
}

fn bn_eval(net: &Network, layer: usize, gamma: usize, beta: usize, a: &[f64]) -> Vec<f64> {
    a.iter()
        .enumerate()
        .map(|(j, v)| {
            let y = at(net, gamma, 0, j) * (v - net.bn.mean[layer][j]) / (net.bn.var[layer][j] + BN_EPS).sqrt() + at(net, beta, 0, j);
            y.max(0.0)
        })
        .collect()
}

pub fn encoder(net: &Network, x: &[f64]) -> Vec<f64> {
    let l = net.layout.enc_hidden;
    let a = dense(net, l.w, l.b, x);
    let y = bn_eval(net, 0, l.gamma, l.beta, &a);
    dense(net, net.layout.enc_w2, net.layout.enc_b2, &y)
}

pub fn gru(net: &Network, x: &[f64], h: &[f64]) -> Vec<f64> {
    let hd = h.len();
    let (w, u, b) = (net.layout.gru_w, net.layout.gru_u, net.layout.gru_b);
    let pre = |col: usize, hin: &[f64]| {
        let mut acc = at(net, b, 0, col);
        for (i, xi) in x.iter().enumerate() {
            acc += xi * at(net, w, i, col);
        }
        for (j, hj) in hin.iter().enumerate() {
            acc += hj * at(net, u, j, col);
        }
        acc
    };
    let z: Vec<f64> = (0..hd).map(|k| sig(pre(k, h))).collect();
    let r: Vec<f64> = (0..hd).map(|k| sig(pre(hd + k, h))).collect();
    let rh: Vec<f64> = (0..hd).map(|k| r[k] * h[k]).collect();
    (0..hd)
        .map(|k| {
            let cand = pre(2 * hd + k, &rh).tanh();
            (1.0 - z[k]) * h[k] + z[k] * cand
        })
        .collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn estimator(net: &Network, h: &[f64]) -> Vec<f64> {
    let mut x = h.to_vec();
    for (l, layer) in net.layout.est.iter().enumerate() {
        let a = dense(net, layer.w, layer.b, &x);
        x = bn_eval(net, l + 1, layer.gamma, layer.beta, &a);
    }
    softmax(&dense(net, net.layout.out_w, net.layout.out_b, &x))
}

/// Evaluation-mode probabilities for one sequence.
pub fn forward_eval(net: &Network, windows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut h = vec![0.0; net.config.gru_hidden];
    windows
        .iter()
        .map(|w| {
            h = gru(net, &encoder(net, w), &h);
            estimator(net, &h)
        })
        .collect()
}

/// Training-mode batch norm over rows, followed by the rectifier.
fn bn_train_relu(net: &Network, gamma: usize, beta: usize, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let width = rows[0].len();
    let mut out = rows.to_vec();
    for j in 0..width {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        for (o, r) in out.iter_mut().zip(rows) {
            o[j] = (at(net, gamma, 0, j) * (r[j] - mean) / (var + BN_EPS).sqrt() + at(net, beta, 0, j)).max(0.0);
        }
    }
    out
}

/// Per-window training-mode losses `−ln p(true)` for a batch, listed per
/// sequence in window order.
pub fn train_losses(net: &Network, seqs: &[Vec<Vec<f64>>], labels: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let flat: Vec<&Vec<f64>> = seqs.iter().flatten().collect();
    let l = net.layout.enc_hidden;
    let pre: Vec<Vec<f64>> = flat.iter().map(|x| dense(net, l.w, l.b, x)).collect();
    let act = bn_train_relu(net, l.gamma, l.beta, &pre);
    let enc: Vec<Vec<f64>> = act.iter().map(|y| dense(net, net.layout.enc_w2, net.layout.enc_b2, y)).collect();
    let mut hs = Vec::new();
    let mut k = 0;
    for seq in seqs {
        let mut h = vec![0.0; net.config.gru_hidden];
        for _ in seq {
            h = gru(net, &enc[k], &h);
            hs.push(h.clone());
            k += 1;
        }
    }
    let mut x = hs;
    for layer in &net.layout.est {
        let a: Vec<Vec<f64>> = x.iter().map(|r| dense(net, layer.w, layer.b, r)).collect();
        x = bn_train_relu(net, layer.gamma, layer.beta, &a);
    }
    let probs: Vec<Vec<f64>> = x.iter().map(|r| softmax(&dense(net, net.layout.out_w, net.layout.out_b, r))).collect();
    let mut out = Vec::new();
    let mut k = 0;
    for (seq, ls) in seqs.iter().zip(labels) {
        out.push(seq.iter().zip(ls).map(|(_, &y)| {
            let v = -probs[k][y].max(1e-12).ln();
            k += 1;
            v
        }).collect());
    }
    out
}
