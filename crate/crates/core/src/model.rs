//! Small differentiable classifiers trained with per-example weights.
//!
//! Both models end in a softmax over `K` classes with cross-entropy loss. A
//! training step minimizes `(1/n) Σ_i w_i ℓ_i` over the batch of `n` rows, so
//! importance weights `1/p_i` keep the step an unbiased estimate of the
//! full-batch gradient.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Logistic,
    Mlp { hidden: usize, activation: Activation },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerSpec {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerSpec {
    pub fn adam(lr: f64) -> Self {
        OptimizerSpec::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerSpec::Sgd { lr } => lr > 0.0 && lr.is_finite(),
            OptimizerSpec::Adam { lr, beta1, beta2, eps } => {
                lr > 0.0
                    && lr.is_finite()
                    && (0.0..1.0).contains(&beta1)
                    && (0.0..1.0).contains(&beta2)
                    && eps > 0.0
            }
        };
        if ok { Ok(()) } else { Err(Error::InvalidParam("invalid optimizer hyperparameters")) }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum OptState {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeskModel {
    spec: ModelSpec,
    optimizer: OptimizerSpec,
    n_features: usize,
    n_classes: usize,
    params: Vec<f64>,
    state: OptState,
}

impl DeskModel {
    /// Gaussian initialization with variance `1/fan_in` (biases zero).
    pub fn new(
        spec: ModelSpec,
        optimizer: OptimizerSpec,
        n_features: usize,
        n_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        optimizer.validate()?;
        if n_features == 0 || n_classes < 2 {
            return Err(Error::InvalidParam("model needs >= 1 feature and >= 2 classes"));
        }
        if let ModelSpec::Mlp { hidden: 0, .. } = spec {
            return Err(Error::InvalidParam("hidden layer needs >= 1 unit"));
        }
        let mut model = DeskModel {
            spec,
            optimizer,
            n_features,
            n_classes,
            params: Vec::new(),
            state: OptState::Sgd,
        };
        let mut rng = rng_from_seed(seed);
        let mut init = |count: usize, fan_in: usize, out: &mut Vec<f64>| {
            let sd = 1.0 / libm::sqrt(fan_in as f64);
            out.extend((0..count).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); sd * z }));
        };
        let mut params = Vec::with_capacity(model.n_params());
        match spec {
            ModelSpec::Logistic => {
                init(n_classes * n_features, n_features, &mut params);
                params.extend(core::iter::repeat_n(0.0, n_classes));
            }
            ModelSpec::Mlp { hidden, .. } => {
                init(hidden * n_features, n_features, &mut params);
                params.extend(core::iter::repeat_n(0.0, hidden));
                init(n_classes * hidden, hidden, &mut params);
                params.extend(core::iter::repeat_n(0.0, n_classes));
            }
        }
        model.params = params;
        model.state = match optimizer {
            OptimizerSpec::Sgd { .. } => OptState::Sgd,
            OptimizerSpec::Adam { .. } => {
                OptState::Adam { m: vec![0.0; model.n_params()], v: vec![0.0; model.n_params()], t: 0 }
            }
        };
        Ok(model)
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_params(&self) -> usize {
        let (d, k) = (self.n_features, self.n_classes);
        match self.spec {
            ModelSpec::Logistic => k * d + k,
            ModelSpec::Mlp { hidden: h, .. } => h * d + h + k * h + k,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::LengthMismatch { expected: self.n_params(), got: params.len() });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Width of [`DeskModel::representation`].
    pub fn representation_dim(&self) -> usize {
        match self.spec {
            ModelSpec::Logistic => self.n_features,
            ModelSpec::Mlp { hidden, .. } => hidden,
        }
    }

    /// Input to the output layer: the hidden activations of an MLP, or the raw
    /// features for the logistic model.
    pub fn representation(&self, x: &[f64]) -> Vec<f64> {
        match self.spec {
            ModelSpec::Logistic => x.to_vec(),
            ModelSpec::Mlp { hidden, activation } => self.hidden(x, hidden, activation).1,
        }
    }

    fn hidden(&self, x: &[f64], hidden: usize, act: Activation) -> (Vec<f64>, Vec<f64>) {
        let d = self.n_features;
        let w1 = &self.params[..hidden * d];
        let b1 = &self.params[hidden * d..hidden * d + hidden];
        let pre: Vec<f64> = (0..hidden)
            .map(|j| b1[j] + w1[j * d..(j + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        let post = pre
            .iter()
            .map(|&z| match act {
                Activation::Tanh => libm::tanh(z),
                Activation::Relu => z.max(0.0),
            })
            .collect();
        (pre, post)
    }

    fn output_offset(&self) -> usize {
        match self.spec {
            ModelSpec::Logistic => 0,
            ModelSpec::Mlp { hidden, .. } => hidden * self.n_features + hidden,
        }
    }

    fn logits_from(&self, input: &[f64]) -> Vec<f64> {
        let width = input.len();
        let off = self.output_offset();
        let w = &self.params[off..off + self.n_classes * width];
        let b = &self.params[off + self.n_classes * width..];
        (0..self.n_classes)
            .map(|c| b[c] + w[c * width..(c + 1) * width].iter().zip(input).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.logits_from(&self.representation(x))
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }

    pub fn loss(&self, x: &[f64], label: usize) -> f64 {
        cross_entropy(&self.logits(x), label)
    }

    fn check_batch(&self, xs: &[f64], labels: &[usize], weights: Option<&[f64]>) -> Result<usize> {
        let n = labels.len();
        if xs.len() != n * self.n_features {
            return Err(Error::LengthMismatch { expected: n * self.n_features, got: xs.len() });
        }
        if let Some(w) = weights {
            if w.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: w.len() });
            }
            if let Some(index) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::NonFinite { index });
            }
        }
        if labels.iter().any(|&l| l >= self.n_classes) {
            return Err(Error::InvalidParam("label out of range"));
        }
        Ok(n)
    }

    /// `(1/n) Σ w_i ℓ_i` (weights default to one).
    pub fn weighted_objective(&self, xs: &[f64], labels: &[usize], weights: Option<&[f64]>) -> Result<f64> {
        let n = self.check_batch(xs, labels, weights)?;
        if n == 0 {
            return Ok(0.0);
        }
        let d = self.n_features;
        let total: f64 = (0..n)
            .map(|i| weights.map_or(1.0, |w| w[i]) * self.loss(&xs[i * d..(i + 1) * d], labels[i]))
            .sum();
        Ok(total / n as f64)
    }

    /// Unweighted per-example losses and the gradient of the weighted objective.
    /// Rows with weight 0 are not backpropagated.
    pub fn loss_and_grad(
        &self,
        xs: &[f64],
        labels: &[usize],
        weights: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.check_batch(xs, labels, weights)?;
        let ones;
        let weights = match weights {
            Some(w) => w,
            None => {
                ones = vec![1.0; n];
                &ones
            }
        };
        let d = self.n_features;
        let k = self.n_classes;
        let mut grad = vec![0.0; self.n_params()];
        let mut losses = Vec::with_capacity(n);
        for i in 0..n {
            let x = &xs[i * d..(i + 1) * d];
            let (pre, input) = match self.spec {
                ModelSpec::Logistic => (Vec::new(), x.to_vec()),
                ModelSpec::Mlp { hidden, activation } => self.hidden(x, hidden, activation),
            };
            let logits = self.logits_from(&input);
            let probs = softmax(&logits);
            losses.push(cross_entropy(&logits, labels[i]));
            let w = weights[i];
            if w == 0.0 || n == 0 {
                continue;
            }
            let scale = w / n as f64;
            let dz: Vec<f64> = probs
                .iter()
                .enumerate()
                .map(|(c, p)| scale * (p - if c == labels[i] { 1.0 } else { 0.0 }))
                .collect();
            let width = input.len();
            let off = self.output_offset();
            for c in 0..k {
                let row = &mut grad[off + c * width..off + (c + 1) * width];
                for (g, v) in row.iter_mut().zip(&input) {
                    *g += dz[c] * v;
                }
                grad[off + k * width + c] += dz[c];
            }
            if let ModelSpec::Mlp { hidden, activation } = self.spec {
                let w2 = &self.params[off..off + k * hidden];
                for j in 0..hidden {
                    let upstream: f64 = (0..k).map(|c| dz[c] * w2[c * hidden + j]).sum();
                    let local = match activation {
                        Activation::Tanh => 1.0 - input[j] * input[j],
                        Activation::Relu => if pre[j] > 0.0 { 1.0 } else { 0.0 },
                    };
                    let delta = upstream * local;
                    for (g, v) in grad[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *g += delta * v;
                    }
                    grad[hidden * d + j] += delta;
                }
            }
        }
        Ok((losses, grad))
    }

    /// One optimizer step on the weighted objective; returns unweighted losses.
    ///
    /// When every weight is zero the parameters and optimizer state are left
    /// untouched.
    pub fn train_step(&mut self, xs: &[f64], labels: &[usize], weights: Option<&[f64]>) -> Result<Vec<f64>> {
        let (losses, grad) = self.loss_and_grad(xs, labels, weights)?;
        let active = weights.map_or(!labels.is_empty(), |w| w.iter().any(|&v| v != 0.0));
        if active {
            self.apply(&grad);
        }
        Ok(losses)
    }

    fn apply(&mut self, grad: &[f64]) {
        match (&mut self.state, self.optimizer) {
            (OptState::Sgd, OptimizerSpec::Sgd { lr }) => {
                for (p, g) in self.params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            (OptState::Adam { m, v, t }, OptimizerSpec::Adam { lr, beta1, beta2, eps }) => {
                *t += 1;
                let bc1 = 1.0 - libm::pow(beta1, f64::from(*t));
                let bc2 = 1.0 - libm::pow(beta2, f64::from(*t));
                for i in 0..self.params.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    self.params[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
                }
            }
            _ => unreachable!("optimizer state always matches its spec"),
        }
    }

    /// Mean cross-entropy and accuracy on a labelled set.
    pub fn evaluate(&self, xs: &[f64], labels: &[usize]) -> Result<(f64, f64)> {
        let n = self.check_batch(xs, labels, None)?;
        if n == 0 {
            return Ok((0.0, 0.0));
        }
        let d = self.n_features;
        let (mut loss, mut correct) = (0.0, 0usize);
        for i in 0..n {
            let logits = self.logits(&xs[i * d..(i + 1) * d]);
            loss += cross_entropy(&logits, labels[i]);
            if argmax(&logits) == labels[i] {
                correct += 1;
            }
        }
        Ok((loss / n as f64, correct as f64 / n as f64))
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(z.iter().map(|v| libm::exp(v - max)).sum::<f64>())
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| libm::exp(v - lse)).collect()
}

pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}
