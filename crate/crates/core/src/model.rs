//! Fully connected classifier over a flat parameter vector.
//!
//! Parameters are laid out layer by layer: the weight matrix (rows =
//! output units, row-major) followed by the bias vector. Hidden layers use
//! the configured activation; the output layer feeds a softmax and the
//! loss is mean cross-entropy over the batch.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
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
    fn derivative(self, z: f64, a: f64) -> f64 {
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

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_classes: usize,
    pub activation: Activation,
}

impl ModelSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_classes: usize, activation: Activation) -> Self {
        ModelSpec {
            input_dim,
            hidden_dims,
            output_classes,
            activation,
        }
    }

    fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_classes);
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::field("model.input_dim", "must be at least 1"));
        }
        if self.output_classes < 2 {
            return Err(Error::field("model.output_classes", "must be at least 2"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::field("model.hidden", "hidden layer widths must be at least 1"));
        }
        Ok(())
    }

    /// Uniform(-s, s) weights with s = 1/sqrt(fan_in); biases start at zero.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = seeded_rng(seed);
        let mut values = Vec::with_capacity(self.param_count());
        for w in self.layer_dims().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let s = 1.0 / (fan_in as f64).sqrt();
            values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-s..s)));
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ParamVector::from_vec(values)
    }

    fn check(&self, params: &ParamVector, batch: &Dataset) -> Result<()> {
        self.validate()?;
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if batch.input_dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: batch.input_dim(),
            });
        }
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if batch.labels().iter().any(|&l| l >= self.output_classes) {
            return Err(Error::config(format!(
                "label out of range for a {}-class model",
                self.output_classes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // η = 0 is permitted for diagnostics: it yields zero updates
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::field("train.learning_rate", "must be a non-negative finite number"));
        }
        if self.local_epochs < 1 {
            return Err(Error::field("train.local_epochs", "must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::field("train.batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

struct Layer {
    w_off: usize,
    b_off: usize,
    fan_in: usize,
    fan_out: usize,
}

fn layers(spec: &ModelSpec) -> Vec<Layer> {
    let mut off = 0;
    spec.layer_dims()
        .windows(2)
        .map(|w| {
            let l = Layer {
                w_off: off,
                b_off: off + w[0] * w[1],
                fan_in: w[0],
                fan_out: w[1],
            };
            off += w[0] * w[1] + w[1];
            l
        })
        .collect()
}

/// Pre-activations and activations of every layer for one sample.
/// `acts[0]` is the input; the last entry of `pre` holds the logits.
struct Trace {
    pre: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
}

fn forward_sample(p: &[f64], spec: &ModelSpec, layers: &[Layer], x: &[f64]) -> Trace {
    let mut pre = Vec::with_capacity(layers.len());
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x.to_vec());
    for (li, layer) in layers.iter().enumerate() {
        let input = acts.last().expect("input present");
        let mut z = p[layer.b_off..layer.b_off + layer.fan_out].to_vec();
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &p[layer.w_off + o * layer.fan_in..layer.w_off + (o + 1) * layer.fan_in];
            *zo += row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
        }
        let last = li + 1 == layers.len();
        let a = if last {
            z.clone()
        } else {
            z.iter().map(|&v| spec.activation.apply(v)).collect()
        };
        pre.push(z);
        acts.push(a);
    }
    Trace { pre, acts }
}

/// Returns (log-sum-exp, softmax probabilities) of the logits.
fn softmax(logits: &[f64]) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    (max + sum.ln(), exps.into_iter().map(|e| e / sum).collect())
}

/// Mean softmax cross-entropy of the batch.
pub fn forward_loss(params: &ParamVector, spec: &ModelSpec, batch: &Dataset) -> Result<f64> {
    spec.check(params, batch)?;
    let layers = layers(spec);
    let p = params.as_slice();
    let total: f64 = (0..batch.len())
        .map(|i| {
            let trace = forward_sample(p, spec, &layers, batch.row(i));
            let logits = trace.pre.last().expect("output layer");
            let (lse, _) = softmax(logits);
            lse - logits[batch.label(i)]
        })
        .sum();
    Ok(total / batch.len() as f64)
}

/// Gradient of [`forward_loss`] with respect to the parameters.
pub fn gradient(params: &ParamVector, spec: &ModelSpec, batch: &Dataset) -> Result<ParamVector> {
    spec.check(params, batch)?;
    let layers = layers(spec);
    let p = params.as_slice();
    let mut grad = vec![0.0; p.len()];
    for i in 0..batch.len() {
        let trace = forward_sample(p, spec, &layers, batch.row(i));
        let (_, mut delta) = softmax(trace.pre.last().expect("output layer"));
        delta[batch.label(i)] -= 1.0;

        for li in (0..layers.len()).rev() {
            let layer = &layers[li];
            let input = &trace.acts[li];
            for (o, &d) in delta.iter().enumerate() {
                let row = &mut grad[layer.w_off + o * layer.fan_in..layer.w_off + (o + 1) * layer.fan_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[layer.b_off + o] += d;
            }
            if li == 0 {
                break;
            }
            let below_pre = &trace.pre[li - 1];
            let below_act = &trace.acts[li];
            delta = (0..layer.fan_in)
                .map(|j| {
                    let back: f64 = delta
                        .iter()
                        .enumerate()
                        .map(|(o, d)| d * p[layer.w_off + o * layer.fan_in + j])
                        .sum();
                    back * spec.activation.derivative(below_pre[j], below_act[j])
                })
                .collect();
        }
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok(ParamVector::from_vec(grad))
}

/// Index of the largest logit; ties go to the lowest class.
pub fn predict(params: &ParamVector, spec: &ModelSpec, x: &[f64]) -> usize {
    let layers = layers(spec);
    let trace = forward_sample(params.as_slice(), spec, &layers, x);
    let logits = trace.pre.last().expect("output layer");
    let mut best = 0;
    for (c, &z) in logits.iter().enumerate() {
        if z > logits[best] {
            best = c;
        }
    }
    best
}

/// Fraction of correctly classified samples.
pub fn accuracy(params: &ParamVector, spec: &ModelSpec, data: &Dataset) -> Result<f64> {
    spec.check(params, data)?;
    let correct = (0..data.len())
        .filter(|&i| predict(params, spec, data.row(i)) == data.label(i))
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Runs `cfg.local_epochs` epochs of mini-batch SGD starting from `global`
/// and returns the parameter delta `w_local - global`. Each epoch visits
/// the samples in an order given by a Fisher–Yates shuffle seeded from
/// `shuffle_seed`.
///
/// With one epoch and a full batch this is exactly one gradient step,
/// `-η ∇F(global)`.
pub fn local_train(
    global: &ParamVector,
    spec: &ModelSpec,
    data: &Dataset,
    cfg: &TrainConfig,
    shuffle_seed: u64,
) -> Result<ParamVector> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = seeded_rng(shuffle_seed);
    let mut w = global.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.local_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.subset(chunk);
            let g = gradient(&w, spec, &batch)?;
            w.axpy(-cfg.learning_rate, &g);
        }
    }
    Ok(&w - global)
}
