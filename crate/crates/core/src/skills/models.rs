use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::SkillDataset;
use crate::env::distance;
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Checkpoint, Mlp};
use crate::rl::stream_rng;

/// Hyper-parameters for fitting the coarse dynamics and success models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub episodes: usize,
    pub task_start_fraction: f64,
    pub max_skill_steps: usize,
    pub min_rows: usize,
    pub holdout_fraction: f64,
    pub batch_size: usize,
    pub dynamics_hidden: Vec<usize>,
    pub dynamics_lr: f64,
    pub dynamics_epochs: usize,
    pub success_hidden: Vec<usize>,
    pub success_lr: f64,
    pub success_epochs: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            episodes: 5000,
            task_start_fraction: 0.5,
            max_skill_steps: 25,
            min_rows: 2000,
            holdout_fraction: 0.1,
            batch_size: 128,
            dynamics_hidden: vec![128, 128, 128],
            dynamics_lr: 1e-3,
            dynamics_epochs: 200,
            success_hidden: vec![50, 100],
            success_lr: 1e-3,
            success_epochs: 50,
        }
    }
}

/// Per-dimension affine standardization fitted to data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: Array1::zeros(dim), std: Array1::ones(dim) }
    }

    /// Column statistics of `x`. Constant columns get zero scale: they
    /// normalize to 0 and denormalize to their constant.
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
        let std = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-8 { s } else { 0.0 });
        Standardizer { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, x: &mut Array2<f64>) {
        for mut row in x.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if *s > 0.0 { (*v - m) / s } else { 0.0 };
            }
        }
    }

    pub fn denormalize(&self, x: &mut Array2<f64>) {
        *x *= &self.std;
        *x += &self.mean;
    }

    fn write_into(&self, ckpt: &mut Checkpoint, name: &str) {
        ckpt.push_vector(format!("{name}.mean"), self.mean.as_slice().unwrap());
        ckpt.push_vector(format!("{name}.std"), self.std.as_slice().unwrap());
    }

    fn read_from(ckpt: &Checkpoint, name: &str) -> Result<Self> {
        let mean = Array1::from(ckpt.vector(&format!("{name}.mean"))?);
        let std = Array1::from(ckpt.vector(&format!("{name}.std"))?);
        if mean.len() != std.len() {
            return Err(Error::CorruptCheckpoint(format!("`{name}` statistics disagree in length")));
        }
        Ok(Standardizer { mean, std })
    }
}

fn inputs_of(ds: &SkillDataset) -> Array2<f64> {
    let d = ds.state_dim + ds.goal_dim;
    let mut x = Array2::zeros((ds.len(), d));
    for (i, r) in ds.rows.iter().enumerate() {
        for (j, v) in r.start.iter().chain(&r.goal).enumerate() {
            x[[i, j]] = *v;
        }
    }
    x
}

fn join(states: ArrayView2<f64>, goals: ArrayView2<f64>) -> Result<Array2<f64>> {
    if states.nrows() != goals.nrows() {
        return Err(Error::dims("batch rows", states.nrows(), goals.nrows()));
    }
    ndarray::concatenate(Axis(1), &[states, goals]).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Minibatch Adam over shuffled rows; `grad` maps (prediction, row indices)
/// to (loss, gradient w.r.t. the prediction) for that batch.
fn fit<F>(
    net: &mut Mlp,
    lr: f64,
    x: &Array2<f64>,
    epochs: usize,
    batch: usize,
    rng: &mut ChaCha8Rng,
    mut grad: F,
) -> Result<f64>
where
    F: FnMut(&Array2<f64>, &[usize]) -> (f64, Array2<f64>),
{
    let mut adam = Adam::new(net, AdamConfig::with_lr(lr));
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut last_loss = f64::NAN;
    for _ in 0..epochs {
        order.shuffle(rng);
        let (mut total, mut count) = (0.0, 0usize);
        for chunk in order.chunks(batch.max(1)) {
            let xb = x.select(Axis(0), chunk);
            let tape = net.forward_cached(xb.view())?;
            let (loss, g) = grad(tape.output(), chunk);
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("model loss became {loss}")));
            }
            let (grads, _) = net.backward(&tape, g.view())?;
            adam.step(net, &grads)?;
            total += loss * chunk.len() as f64;
            count += chunk.len();
        }
        last_loss = total / count.max(1) as f64;
    }
    Ok(last_loss)
}

/// Coarse skill dynamics `T_coarse: (s, g) → s_final`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    pub net: Mlp,
    pub input: Standardizer,
    pub output: Standardizer,
    /// Per-dimension clipping range applied to predictions.
    pub bounds: Vec<(f64, f64)>,
    pub state_dim: usize,
    pub goal_dim: usize,
}

/// Held-out quality of a fitted dynamics model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReport {
    pub train_rows: usize,
    pub heldout_rows: usize,
    pub train_loss: f64,
    /// Mean Euclidean distance between predicted and actual final states over
    /// the `error_dims` coordinates on the held-out split.
    pub heldout_error: f64,
}

impl DynamicsModel {
    pub fn predict_batch(&self, states: ArrayView2<f64>, goals: ArrayView2<f64>) -> Result<Array2<f64>> {
        if states.ncols() != self.state_dim {
            return Err(Error::dims("state", self.state_dim, states.ncols()));
        }
        if goals.ncols() != self.goal_dim {
            return Err(Error::dims("goal", self.goal_dim, goals.ncols()));
        }
        let mut x = join(states, goals)?;
        self.input.normalize(&mut x);
        let mut y = self.net.forward_batch(x.view())?;
        self.output.denormalize(&mut y);
        for mut row in y.rows_mut() {
            for (v, &(lo, hi)) in row.iter_mut().zip(&self.bounds) {
                *v = v.clamp(lo, hi);
            }
        }
        Ok(y)
    }

    /// Predicted state after running the skill from `state` towards `goal`.
    pub fn predict_successor(&self, state: &[f64], goal: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::dims("state", self.state_dim, state.len()));
        }
        if goal.len() != self.goal_dim {
            return Err(Error::dims("goal", self.goal_dim, goal.len()));
        }
        let s = ndarray::aview1(state).insert_axis(Axis(0));
        let g = ndarray::aview1(goal).insert_axis(Axis(0));
        Ok(self.predict_batch(s, g)?.row(0).to_vec())
    }

    pub fn write_into(&self, ckpt: &mut Checkpoint, name: &str) {
        ckpt.push_mlp(&format!("{name}.net"), &self.net);
        self.input.write_into(ckpt, &format!("{name}.input"));
        self.output.write_into(ckpt, &format!("{name}.output"));
        let lo: Vec<f64> = self.bounds.iter().map(|b| b.0).collect();
        let hi: Vec<f64> = self.bounds.iter().map(|b| b.1).collect();
        ckpt.push_vector(format!("{name}.bounds_lo"), &lo);
        ckpt.push_vector(format!("{name}.bounds_hi"), &hi);
        ckpt.push_vector(format!("{name}.dims"), &[self.state_dim as f64, self.goal_dim as f64]);
    }

    pub fn read_from(ckpt: &Checkpoint, name: &str) -> Result<Self> {
        let net = ckpt.mlp(&format!("{name}.net"))?;
        let input = Standardizer::read_from(ckpt, &format!("{name}.input"))?;
        let output = Standardizer::read_from(ckpt, &format!("{name}.output"))?;
        let lo = ckpt.vector(&format!("{name}.bounds_lo"))?;
        let hi = ckpt.vector(&format!("{name}.bounds_hi"))?;
        let dims = ckpt.vector(&format!("{name}.dims"))?;
        let [sd, gd] = dims[..] else {
            return Err(Error::CorruptCheckpoint(format!("bad `{name}.dims`")));
        };
        let (state_dim, goal_dim) = (sd as usize, gd as usize);
        if lo.len() != state_dim || hi.len() != state_dim || net.input_dim() != state_dim + goal_dim {
            return Err(Error::CorruptCheckpoint(format!("`{name}` dimensions disagree")));
        }
        Ok(DynamicsModel { net, input, output, bounds: lo.into_iter().zip(hi).collect(), state_dim, goal_dim })
    }
}

/// Fits `T_coarse` by mean-squared error on standardized inputs and targets.
///
/// `bounds` clips predictions per state dimension; `error_dims` selects the
/// coordinates the held-out Euclidean error is measured on.
pub fn train_dynamics(
    ds: &SkillDataset,
    cfg: &ModelConfig,
    bounds: Vec<(f64, f64)>,
    error_dims: std::ops::Range<usize>,
    seed: u64,
) -> Result<(DynamicsModel, DynamicsReport)> {
    if ds.len() < cfg.min_rows.max(2) {
        return Err(Error::InsufficientData { needed: cfg.min_rows.max(2), got: ds.len() });
    }
    if bounds.len() != ds.state_dim || error_dims.end > ds.state_dim {
        return Err(Error::dims("bounds", ds.state_dim, bounds.len()));
    }
    let mut rng = stream_rng(seed, 0);
    let (train, test) = ds.split(cfg.holdout_fraction, &mut rng);
    let mut x = inputs_of(&train);
    let mut y = Array2::zeros((train.len(), ds.state_dim));
    for (i, r) in train.rows.iter().enumerate() {
        y.row_mut(i).assign(&Array1::from(r.final_state.clone()));
    }
    let input = Standardizer::fit(x.view());
    let output = Standardizer::fit(y.view());
    input.normalize(&mut x);
    output.normalize(&mut y);

    let mut sizes = vec![ds.state_dim + ds.goal_dim];
    sizes.extend(&cfg.dynamics_hidden);
    sizes.push(ds.state_dim);
    let mut init = stream_rng(seed, 1);
    let mut net = Mlp::new(&sizes, Activation::Relu, Activation::Linear, &mut init)?;
    let out_dim = ds.state_dim as f64;
    let train_loss = fit(&mut net, cfg.dynamics_lr, &x, cfg.dynamics_epochs, cfg.batch_size, &mut rng, |pred, idx| {
        let target = y.select(Axis(0), idx);
        let err = pred - &target;
        let n = idx.len() as f64;
        let loss = err.mapv(|e| e * e).sum() / (n * out_dim);
        (loss, err * (2.0 / (n * out_dim)))
    })?;

    let model = DynamicsModel { net, input, output, bounds, state_dim: ds.state_dim, goal_dim: ds.goal_dim };
    let heldout_error = mean_error(&model, &test, error_dims)?;
    let report = DynamicsReport { train_rows: train.len(), heldout_rows: test.len(), train_loss, heldout_error };
    Ok((model, report))
}

/// Mean Euclidean error of the model's predictions on `ds` over `dims`.
pub fn mean_error(model: &DynamicsModel, ds: &SkillDataset, dims: std::ops::Range<usize>) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let x = inputs_of(ds);
    let pred = model.predict_batch(x.slice(s![.., ..ds.state_dim]), x.slice(s![.., ds.state_dim..]))?;
    let total: f64 = ds
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| distance(&pred.row(i).to_vec()[dims.clone()], &r.final_state[dims.clone()]))
        .sum();
    Ok(total / ds.len() as f64)
}

/// Skill success probability `u: (s, g) → (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessModel {
    pub net: Mlp,
    pub input: Standardizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub train_rows: usize,
    pub heldout_rows: usize,
    pub train_loss: f64,
    pub heldout_accuracy: f64,
    pub positive_rate: f64,
    /// Labels were all one class; the model is a constant.
    pub degenerate: bool,
}

/// Outputs are kept this far inside (0, 1).
const PROB_MARGIN: f64 = 1e-6;

impl SuccessModel {
    /// A model that predicts `p` everywhere.
    pub fn constant(state_dim: usize, goal_dim: usize, hidden: &[usize], p: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut sizes = vec![state_dim + goal_dim];
        sizes.extend(hidden);
        sizes.push(1);
        let mut net = Mlp::new(&sizes, Activation::Relu, Activation::Sigmoid, rng)?;
        let last = net.weights().len() - 1;
        net.weights_mut()[last].fill(0.0);
        let p = p.clamp(PROB_MARGIN, 1.0 - PROB_MARGIN);
        net.biases_mut()[last].fill((p / (1.0 - p)).ln());
        Ok(SuccessModel { net, input: Standardizer::identity(state_dim + goal_dim) })
    }

    pub fn predict_batch(&self, states: ArrayView2<f64>, goals: ArrayView2<f64>) -> Result<Array1<f64>> {
        if states.ncols() + goals.ncols() != self.input.dim() {
            return Err(Error::dims("state+goal", self.input.dim(), states.ncols() + goals.ncols()));
        }
        let mut x = join(states, goals)?;
        self.input.normalize(&mut x);
        let p = self.net.forward_batch(x.view())?;
        Ok(p.column(0).mapv(|v| v.clamp(PROB_MARGIN, 1.0 - PROB_MARGIN)))
    }

    /// Probability that the skill reaches `goal` when launched from `state`.
    pub fn predict_success(&self, state: &[f64], goal: &[f64]) -> Result<f64> {
        if state.len() + goal.len() != self.input.dim() {
            return Err(Error::dims("state+goal", self.input.dim(), state.len() + goal.len()));
        }
        let s = ndarray::aview1(state).insert_axis(Axis(0));
        let g = ndarray::aview1(goal).insert_axis(Axis(0));
        Ok(self.predict_batch(s, g)?[0])
    }

    pub fn write_into(&self, ckpt: &mut Checkpoint, name: &str) {
        ckpt.push_mlp(&format!("{name}.net"), &self.net);
        self.input.write_into(ckpt, &format!("{name}.input"));
    }

    pub fn read_from(ckpt: &Checkpoint, name: &str) -> Result<Self> {
        let net = ckpt.mlp(&format!("{name}.net"))?;
        let input = Standardizer::read_from(ckpt, &format!("{name}.input"))?;
        if net.input_dim() != input.dim() || net.output_dim() != 1 {
            return Err(Error::CorruptCheckpoint(format!("`{name}` dimensions disagree")));
        }
        Ok(SuccessModel { net, input })
    }
}

/// Fits `u` by binary cross-entropy. Single-class data yields a constant
/// model (with a warning) instead of an error.
pub fn train_success(ds: &SkillDataset, cfg: &ModelConfig, seed: u64) -> Result<(SuccessModel, SuccessReport)> {
    if ds.len() < cfg.min_rows.max(2) {
        return Err(Error::InsufficientData { needed: cfg.min_rows.max(2), got: ds.len() });
    }
    let mut rng = stream_rng(seed, 2);
    let mut init = stream_rng(seed, 3);
    let (train, test) = ds.split(cfg.holdout_fraction, &mut rng);
    let positive_rate = ds.success_rate();
    if positive_rate == 0.0 || positive_rate == 1.0 {
        log::warn!("success labels are all {}; fitting a constant model", positive_rate == 1.0);
        let p = if positive_rate == 1.0 { 1.0 - 1e-3 } else { 1e-3 };
        let model = SuccessModel::constant(ds.state_dim, ds.goal_dim, &cfg.success_hidden, p, &mut init)?;
        let report = SuccessReport {
            train_rows: train.len(),
            heldout_rows: test.len(),
            train_loss: 0.0,
            heldout_accuracy: 1.0,
            positive_rate,
            degenerate: true,
        };
        return Ok((model, report));
    }
    let mut x = inputs_of(&train);
    let labels: Array1<f64> = train.rows.iter().map(|r| if r.success { 1.0 } else { 0.0 }).collect();
    let input = Standardizer::fit(x.view());
    input.normalize(&mut x);
    let mut sizes = vec![ds.state_dim + ds.goal_dim];
    sizes.extend(&cfg.success_hidden);
    sizes.push(1);
    let mut net = Mlp::new(&sizes, Activation::Relu, Activation::Sigmoid, &mut init)?;
    let train_loss = fit(&mut net, cfg.success_lr, &x, cfg.success_epochs, cfg.batch_size, &mut rng, |pred, idx| {
        let n = idx.len() as f64;
        let mut loss = 0.0;
        let mut g = Array2::zeros((idx.len(), 1));
        for (k, &i) in idx.iter().enumerate() {
            let p = pred[[k, 0]].clamp(1e-12, 1.0 - 1e-12);
            let y = labels[i];
            loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            // dL/dp; the sigmoid's derivative p(1-p) is applied by backprop.
            g[[k, 0]] = (p - y) / (p * (1.0 - p)) / n;
        }
        (loss / n, g)
    })?;
    let model = SuccessModel { net, input };
    let heldout_accuracy = accuracy(&model, &test)?;
    let report = SuccessReport {
        train_rows: train.len(),
        heldout_rows: test.len(),
        train_loss,
        heldout_accuracy,
        positive_rate,
        degenerate: false,
    };
    Ok((model, report))
}

/// Fraction of rows whose label matches `u > 0.5`.
pub fn accuracy(model: &SuccessModel, ds: &SkillDataset) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let x = inputs_of(ds);
    let p = model.predict_batch(x.slice(s![.., ..ds.state_dim]), x.slice(s![.., ds.state_dim..]))?;
    let correct = ds.rows.iter().zip(p.iter()).filter(|(r, &p)| r.success == (p > 0.5)).count();
    Ok(correct as f64 / ds.len() as f64)
}
