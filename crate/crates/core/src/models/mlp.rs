use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn deriv(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            activation: Activation::Relu,
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            epochs: 300,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// `outputs × inputs`, row-major.
    w: Vec<f64>,
    b: Vec<f64>,
}

/// Fully connected network with a single linear output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    activation: Activation,
    layers: Vec<Layer>,
}

impl Mlp {
    /// Glorot-uniform weights and zero biases.
    pub fn new(inputs: usize, hidden: &[usize], activation: Activation, rng: &mut impl Rng) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|s| {
                let (i, o) = (s[0], s[1]);
                let limit = (6.0 / (i + o).max(1) as f64).sqrt();
                Layer { inputs: i, outputs: o, w: (0..i * o).map(|_| rng.gen_range(-limit..limit)).collect(), b: vec![0.0; o] }
            })
            .collect();
        Self { activation, layers }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(&l.b).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = *it.next().expect("parameter vector too short");
            }
        }
    }

    /// Returns pre-activations and activations of every layer (input included).
    fn forward(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let input = acts.last().expect("input layer");
            let z: Vec<f64> = (0..l.outputs)
                .map(|o| l.b[o] + l.w[o * l.inputs..(o + 1) * l.inputs].iter().zip(input).map(|(w, a)| w * a).sum::<f64>())
                .collect();
            let a = if k == last { z.clone() } else { z.iter().map(|&v| self.activation.apply(v)).collect() };
            zs.push(z);
            acts.push(a);
        }
        (zs, acts)
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            cur = (0..l.outputs)
                .map(|o| {
                    let z = l.b[o] + l.w[o * l.inputs..(o + 1) * l.inputs].iter().zip(&cur).map(|(w, a)| w * a).sum::<f64>();
                    if k == last {
                        z
                    } else {
                        self.activation.apply(z)
                    }
                })
                .collect();
        }
        cur[0]
    }

    /// ½·mean squared error over `rows` and its gradient in [`params`](Self::params) order.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[f64], rows: &[usize]) -> (f64, Vec<f64>) {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> =
            self.layers.iter().map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()])).collect();
        let m = rows.len().max(1) as f64;
        let mut loss = 0.0;
        for &r in rows {
            let (zs, acts) = self.forward(x.row(r));
            let err = acts.last().expect("output")[0] - y[r];
            loss += 0.5 * err * err;
            let mut delta = vec![err / m];
            for k in (0..self.layers.len()).rev() {
                let l = &self.layers[k];
                let input = &acts[k];
                let (gw, gb) = &mut grads[k];
                for o in 0..l.outputs {
                    gb[o] += delta[o];
                    for i in 0..l.inputs {
                        gw[o * l.inputs + i] += delta[o] * input[i];
                    }
                }
                if k > 0 {
                    let prev_z = &zs[k - 1];
                    delta = (0..l.inputs)
                        .map(|i| {
                            let back: f64 = (0..l.outputs).map(|o| l.w[o * l.inputs + i] * delta[o]).sum();
                            back * self.activation.deriv(prev_z[i], input[i])
                        })
                        .collect();
                }
            }
        }
        let flat = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
        (loss / m, flat)
    }
}

/// Mini-batch training with per-epoch seeded shuffling.
pub fn fit_mlp(x: &Matrix, y: &[f64], params: &MlpParams) -> Result<Mlp> {
    let n = y.len();
    if x.nrows() != n || n == 0 {
        return Err(Error::Model(format!("{} rows but {n} targets", x.nrows())));
    }
    if params.batch_size == 0 || !(params.learning_rate > 0.0) || params.hidden.contains(&0) {
        return Err(Error::Model(format!("invalid network parameters {params:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut net = Mlp::new(x.ncols(), &params.hidden, params.activation, &mut rng);
    let all: Vec<usize> = (0..n).collect();
    let initial = net.loss_and_grad(x, y, &all).0.max(f64::MIN_POSITIVE);
    let mut theta = net.params();
    let (mut m1, mut m2) = (vec![0.0; theta.len()], vec![0.0; theta.len()]);
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut step = 0i32;
    let mut order = all.clone();
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let (_, g) = net.loss_and_grad(x, y, batch);
            step += 1;
            match params.optimizer {
                Optimizer::Sgd => {
                    for (t, gi) in theta.iter_mut().zip(&g) {
                        *t -= params.learning_rate * gi;
                    }
                }
                Optimizer::Adam => {
                    let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
                    for i in 0..theta.len() {
                        m1[i] = b1 * m1[i] + (1.0 - b1) * g[i];
                        m2[i] = b2 * m2[i] + (1.0 - b2) * g[i] * g[i];
                        theta[i] -= params.learning_rate * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                    }
                }
            }
            net.set_params(&theta);
        }
        let loss = net.loss_and_grad(x, y, &all).0;
        if !loss.is_finite() || loss > 1e6 * initial {
            return Err(Error::Model(format!(
                "network diverged at epoch {}: loss {loss:e} vs initial {initial:e}; lower the learning rate",
                epoch + 1
            )));
        }
    }
    Ok(net)
}
