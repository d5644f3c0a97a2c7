//! Fully connected ReLU network with a softmax output, trained by minibatch
//! SGD on cross-entropy.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (`out x in`, row-major) followed by the bias vector.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Update;
use crate::datasets::LabeledDataset;
use crate::error::{config_err, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelArch {
    /// Input width, hidden widths, output width.
    pub widths: Vec<usize>,
}

impl ModelArch {
    pub fn mlp(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        let arch = ModelArch { widths };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 {
            return Err(config_err("an MLP needs at least one hidden layer"));
        }
        if self.widths.contains(&0) {
            return Err(config_err(format!("layer widths must be positive, got {:?}", self.widths)));
        }
        Ok(())
    }

    pub fn input(&self) -> usize {
        self.widths[0]
    }

    pub fn output(&self) -> usize {
        *self.widths.last().expect("validated arch")
    }

    fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Offset of layer `l`'s weights and of its biases in the flat vector.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for i in 0..l {
            off += self.widths[i + 1] * (self.widths[i] + 1);
        }
        (off, off + self.widths[l + 1] * self.widths[l])
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub arch: ModelArch,
    pub version: u32,
    pub theta: Vec<f64>,
}

impl ModelParams {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn init(arch: ModelArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng::rng_from(seed);
        let mut theta = Vec::with_capacity(arch.num_params());
        for w in arch.widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            theta.extend((0..w[1] * (w[0] + 1)).map(|_| rng.random_range(-bound..=bound)));
        }
        Ok(ModelParams { arch, version: 0, theta })
    }

    pub fn zeros(arch: ModelArch) -> Result<Self> {
        arch.validate()?;
        let theta = vec![0.0; arch.num_params()];
        Ok(ModelParams { arch, version: 0, theta })
    }

    pub fn check(&self) -> Result<()> {
        self.arch.validate()?;
        if self.theta.len() != self.arch.num_params() {
            return Err(config_err(format!(
                "parameter vector has {} entries, architecture needs {}",
                self.theta.len(),
                self.arch.num_params()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1,
            lr: 0.05,
            batch_size: 10,
        }
    }
}

/// Scratch buffers for one forward/backward pass.
struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(arch: &ModelArch) -> Self {
        Workspace {
            acts: arch.widths.iter().map(|&w| vec![0.0; w]).collect(),
            deltas: arch.widths.iter().map(|&w| vec![0.0; w]).collect(),
        }
    }
}

fn forward(arch: &ModelArch, theta: &[f64], x: &[f64], ws: &mut Workspace) {
    ws.acts[0].copy_from_slice(x);
    let last = arch.layers() - 1;
    for l in 0..arch.layers() {
        let (w_off, b_off) = arch.offsets(l);
        let (n_in, n_out) = (arch.widths[l], arch.widths[l + 1]);
        let (prev, next) = ws.acts.split_at_mut(l + 1);
        let input = &prev[l];
        let out = &mut next[0];
        for (o, z) in out.iter_mut().enumerate() {
            let row = &theta[w_off + o * n_in..w_off + (o + 1) * n_in];
            let s = theta[b_off + o] + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
            *z = if l < last { s.max(0.0) } else { s };
        }
        debug_assert_eq!(out.len(), n_out);
    }
}

/// Softmax in place; returns log-sum-exp of the original logits.
fn softmax(logits: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
    max + sum.ln()
}

/// Adds the gradient of one sample's loss into `grad`, returns the loss.
fn backprop(arch: &ModelArch, theta: &[f64], x: &[f64], y: usize, ws: &mut Workspace, grad: &mut [f64]) -> f64 {
    forward(arch, theta, x, ws);
    let top = arch.layers();
    let logit_y = ws.acts[top][y];
    let lse = softmax(&mut ws.acts[top]);
    let loss = lse - logit_y;
    ws.deltas[top].copy_from_slice(&ws.acts[top]);
    ws.deltas[top][y] -= 1.0;

    for l in (0..top).rev() {
        let (w_off, b_off) = arch.offsets(l);
        let n_in = arch.widths[l];
        let (lower, upper) = ws.deltas.split_at_mut(l + 1);
        let delta = &upper[0];
        let input = &ws.acts[l];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let g = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
            for (gi, a) in g.iter_mut().zip(input) {
                *gi += d * a;
            }
            grad[b_off + o] += d;
        }
        if l > 0 {
            let prev = &mut lower[l];
            prev.iter_mut().for_each(|p| *p = 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &theta[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            // ReLU derivative from the post-activation value
            for (p, a) in prev.iter_mut().zip(&ws.acts[l]) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
        }
    }
    loss
}

fn check_dims(params: &ModelParams, ds: &LabeledDataset) -> Result<()> {
    params.check()?;
    if ds.dim != params.arch.input() {
        return Err(config_err(format!(
            "dataset has {} features, model expects {}",
            ds.dim,
            params.arch.input()
        )));
    }
    if ds.num_classes > params.arch.output() {
        return Err(config_err(format!(
            "dataset has {} classes, model outputs {}",
            ds.num_classes,
            params.arch.output()
        )));
    }
    Ok(())
}

/// Mean cross-entropy and its gradient over the given rows.
pub fn loss_and_gradient(params: &ModelParams, ds: &LabeledDataset, rows: &[usize]) -> Result<(f64, Vec<f64>)> {
    check_dims(params, ds)?;
    let mut grad = vec![0.0; params.theta.len()];
    let mut ws = Workspace::new(&params.arch);
    let mut loss = 0.0;
    for &i in rows {
        loss += backprop(&params.arch, &params.theta, ds.row(i), ds.labels[i], &mut ws, &mut grad);
    }
    let n = rows.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Smallest absolute hidden pre-activation over the dataset: how far the
/// loss is from a ReLU kink.
pub fn relu_margin(params: &ModelParams, ds: &LabeledDataset) -> Result<f64> {
    check_dims(params, ds)?;
    let arch = &params.arch;
    let mut ws = Workspace::new(arch);
    let mut margin = f64::INFINITY;
    for i in 0..ds.len() {
        ws.acts[0].copy_from_slice(ds.row(i));
        for l in 0..arch.layers() - 1 {
            let (w_off, b_off) = arch.offsets(l);
            let n_in = arch.widths[l];
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            for (o, z) in next[0].iter_mut().enumerate() {
                let row = &params.theta[w_off + o * n_in..w_off + (o + 1) * n_in];
                let s = params.theta[b_off + o] + row.iter().zip(&prev[l]).map(|(w, a)| w * a).sum::<f64>();
                margin = margin.min(s.abs());
                *z = s.max(0.0);
            }
        }
    }
    Ok(margin)
}

pub fn loss(params: &ModelParams, ds: &LabeledDataset) -> Result<f64> {
    Ok(evaluate(params, ds)?.1)
}

/// Runs `epochs` passes of minibatch SGD over a seeded shuffle of `ds` and
/// returns the parameter change.
pub fn local_train(
    params: &ModelParams,
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    vehicle_id: usize,
    seed: u64,
) -> Result<Update> {
    check_dims(params, ds)?;
    if cfg.batch_size == 0 {
        return Err(config_err("batch_size must be positive"));
    }
    if ds.is_empty() {
        return Err(config_err("cannot train on an empty dataset"));
    }
    let arch = &params.arch;
    let mut theta = params.theta.clone();
    let mut grad = vec![0.0; theta.len()];
    let mut ws = Workspace::new(arch);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = rng::rng_from(seed);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                backprop(arch, &theta, ds.row(i), ds.labels[i], &mut ws, &mut grad);
            }
            let step = cfg.lr / batch.len() as f64;
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= step * g;
            }
        }
    }
    let delta = theta.iter().zip(&params.theta).map(|(a, b)| a - b).collect();
    Ok(Update {
        vehicle_id,
        model_version: params.version,
        delta,
        num_samples: ds.len(),
    })
}

/// Index of the largest logit; the lowest index wins ties.
pub fn predict(params: &ModelParams, x: &[f64]) -> usize {
    let mut ws = Workspace::new(&params.arch);
    predict_with(params, x, &mut ws)
}

fn predict_with(params: &ModelParams, x: &[f64], ws: &mut Workspace) -> usize {
    forward(&params.arch, &params.theta, x, ws);
    let out = &ws.acts[params.arch.layers()];
    let mut best = 0;
    for (c, &z) in out.iter().enumerate() {
        if z > out[best] {
            best = c;
        }
    }
    best
}

/// Accuracy and mean cross-entropy over the whole dataset.
pub fn evaluate(params: &ModelParams, ds: &LabeledDataset) -> Result<(f64, f64)> {
    check_dims(params, ds)?;
    if ds.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut ws = Workspace::new(&params.arch);
    let top = params.arch.layers();
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..ds.len() {
        let y = ds.labels[i];
        if predict_with(params, ds.row(i), &mut ws) == y {
            correct += 1;
        }
        let logit_y = ws.acts[top][y];
        loss += softmax(&mut ws.acts[top]) - logit_y;
    }
    let n = ds.len() as f64;
    Ok((correct as f64 / n, loss / n))
}

pub fn evaluate_accuracy(params: &ModelParams, ds: &LabeledDataset) -> Result<f64> {
    Ok(evaluate(params, ds)?.0)
}

/// Accuracy restricted to samples whose label is in `classes`.
pub fn class_accuracy(params: &ModelParams, ds: &LabeledDataset, classes: &[usize]) -> Result<f64> {
    let rows: Vec<usize> = (0..ds.len()).filter(|&i| classes.contains(&ds.labels[i])).collect();
    evaluate_accuracy(params, &ds.subset(&rows))
}
