//! Parameter tensors, their layout and initialization.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::config::NetworkConfig;

/// Static description of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: (usize, usize),
    /// Weight matrices carry L2 decay and Xavier init; biases and
    /// batch-norm affine terms do not.
    pub kind: TensorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Weight,
    Bias,
    BnScale,
    BnShift,
}

/// Indices of an affine layer followed by batch norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BnLayer {
    pub w: usize,
    pub b: usize,
    pub gamma: usize,
    pub beta: usize,
}

/// Positions of every tensor in the flat parameter list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub enc_hidden: BnLayer,
    pub enc_w2: usize,
    pub enc_b2: usize,
    /// Input weights for `[z | r | h̃]`, shape `encoder_out × 3H`.
    pub gru_w: usize,
    /// Recurrent weights, shape `H × 3H`.
    pub gru_u: usize,
    pub gru_b: usize,
    pub est: Vec<BnLayer>,
    pub out_w: usize,
    pub out_b: usize,
    pub specs: Vec<TensorSpec>,
}

#[derive(Default)]
struct Builder {
    specs: Vec<TensorSpec>,
}

impl Builder {
    fn push(&mut self, name: &str, shape: (usize, usize), kind: TensorKind) -> usize {
        self.specs.push(TensorSpec { name: name.to_string(), shape, kind });
        self.specs.len() - 1
    }

    fn bn_layer(&mut self, prefix: &str, n_in: usize, n_out: usize) -> BnLayer {
        BnLayer {
            w: self.push(&format!("{prefix}.w"), (n_in, n_out), TensorKind::Weight),
            b: self.push(&format!("{prefix}.b"), (1, n_out), TensorKind::Bias),
            gamma: self.push(&format!("{prefix}.bn.gamma"), (1, n_out), TensorKind::BnScale),
            beta: self.push(&format!("{prefix}.bn.beta"), (1, n_out), TensorKind::BnShift),
        }
    }
}

impl Layout {
    pub fn new(config: &NetworkConfig) -> Self {
        let mut b = Builder::default();
        let h = config.gru_hidden;
        let enc_hidden = b.bn_layer("encoder.0", config.input_dim, config.encoder_hidden);
        let enc_w2 = b.push("encoder.1.w", (config.encoder_hidden, config.encoder_out), TensorKind::Weight);
        let enc_b2 = b.push("encoder.1.b", (1, config.encoder_out), TensorKind::Bias);
        let gru_w = b.push("gru.w", (config.encoder_out, 3 * h), TensorKind::Weight);
        let gru_u = b.push("gru.u", (h, 3 * h), TensorKind::Weight);
        let gru_b = b.push("gru.b", (1, 3 * h), TensorKind::Bias);
        let mut est = Vec::new();
        let mut n_in = h;
        for (l, &n_out) in config.estimator_hidden.iter().enumerate() {
            est.push(b.bn_layer(&format!("estimator.{l}"), n_in, n_out));
            n_in = n_out;
        }
        let out_w = b.push("estimator.out.w", (n_in, config.classes), TensorKind::Weight);
        let out_b = b.push("estimator.out.b", (1, config.classes), TensorKind::Bias);
        Self { enc_hidden, enc_w2, enc_b2, gru_w, gru_u, gru_b, est, out_w, out_b, specs: b.specs }
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Number of batch-norm layers: one in the encoder plus one per
    /// estimator hidden layer.
    pub fn bn_count(&self) -> usize {
        1 + self.est.len()
    }

    pub fn zeros(&self) -> Vec<Array2<f64>> {
        self.specs.iter().map(|s| Array2::zeros(s.shape)).collect()
    }

    pub fn scalar_count(&self) -> usize {
        self.specs.iter().map(|s| s.shape.0 * s.shape.1).sum()
    }
}

/// Xavier-uniform weights in `±√(6/(fan_in+fan_out))`, zero biases,
/// unit batch-norm scale and zero shift. The GRU matrices are initialized
/// per gate block so each gate sees its own fan-out.
pub fn init_params<R: Rng>(layout: &Layout, rng: &mut R) -> Vec<Array2<f64>> {
    let mut params = layout.zeros();
    for (i, spec) in layout.specs.iter().enumerate() {
        match spec.kind {
            TensorKind::Weight => {
                let (fan_in, cols) = spec.shape;
                let fan_out = if i == layout.gru_w || i == layout.gru_u { cols / 3 } else { cols };
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                params[i].mapv_inplace(|_| rng.random_range(-bound..bound));
            }
            TensorKind::BnScale => params[i].fill(1.0),
            TensorKind::Bias | TensorKind::BnShift => {}
        }
    }
    params
}

/// Running batch-norm statistics, one entry per batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub mean: Vec<Array1<f64>>,
    pub var: Vec<Array1<f64>>,
}

impl BnStats {
    pub fn new(config: &NetworkConfig) -> Self {
        let widths: Vec<usize> = std::iter::once(config.encoder_hidden).chain(config.estimator_hidden.iter().copied()).collect();
        Self {
            mean: widths.iter().map(|&n| Array1::zeros(n)).collect(),
            var: widths.iter().map(|&n| Array1::ones(n)).collect(),
        }
    }

    /// `running ← (1 − m)·running + m·batch`, with the unbiased batch
    /// variance.
    pub fn update(&mut self, batch: &[(Array1<f64>, Array1<f64>)], rows: usize, momentum: f64) {
        let unbias = if rows > 1 { rows as f64 / (rows - 1) as f64 } else { 1.0 };
        for (l, (mean, var)) in batch.iter().enumerate() {
            self.mean[l].zip_mut_with(mean, |r, &b| *r = (1.0 - momentum) * *r + momentum * b);
            self.var[l].zip_mut_with(var, |r, &b| *r = (1.0 - momentum) * *r + momentum * b * unbias);
        }
    }
}
