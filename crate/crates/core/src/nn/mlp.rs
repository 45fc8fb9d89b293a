use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: &mut Array2<f64>) {
        match self {
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => x.mapv_inplace(f64::tanh),
            Activation::Linear => {}
            Activation::Sigmoid => x.mapv_inplace(sigmoid),
        }
    }

    /// Multiplies `grad` by the activation derivative, expressed through the
    /// post-activation output `y`.
    fn chain(self, y: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Relu => grad.zip_mut_with(y, |g, &y| {
                if y <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => grad.zip_mut_with(y, |g, &y| *g *= 1.0 - y * y),
            Activation::Linear => {}
            Activation::Sigmoid => grad.zip_mut_with(y, |g, &y| *g *= y * (1.0 - y)),
        }
    }

    pub(crate) fn code(self) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::Tanh => 1.0,
            Activation::Linear => 2.0,
            Activation::Sigmoid => 3.0,
        }
    }

    pub(crate) fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Linear),
            3 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fully connected feed-forward network.
///
/// Weight `i` maps layer `i` to layer `i + 1` and has shape
/// `(layer_sizes[i + 1], layer_sizes[i])`. Inputs are batched row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    hidden: Activation,
    output: Activation,
}

/// Per-layer activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct Tape {
    /// `layers[0]` is the input batch; `layers[i + 1]` is the output of layer `i`.
    layers: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.layers.last().expect("tape always holds the input")
    }
}

/// Parameter-shaped buffers: gradients, Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.biases.iter_mut().for_each(|b| *b *= factor);
    }
}

impl Mlp {
    /// Builds a network with weights uniform in `±1/sqrt(fan_in)` and zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "layer sizes must have at least two non-zero entries, got {layer_sizes:?}"
            )));
        }
        if !matches!(hidden, Activation::Relu | Activation::Tanh) {
            return Err(Error::InvalidInput(format!("unsupported hidden activation {hidden:?}")));
        }
        if output == Activation::Relu {
            return Err(Error::InvalidInput("relu is not an output activation".into()));
        }
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-bound..bound)));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Mlp { layer_sizes: layer_sizes.to_vec(), weights, biases, hidden, output })
    }

    /// Assembles a network from explicit parameters, validating shapes.
    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        hidden: Activation,
        output: Activation,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::InvalidInput("weight and bias counts must match".into()));
        }
        let mut layer_sizes = vec![weights[0].ncols()];
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != layer_sizes[i] || b.len() != w.nrows() {
                return Err(Error::InvalidInput(format!("layer {i} has inconsistent shapes")));
            }
            layer_sizes.push(w.nrows());
        }
        Ok(Mlp { layer_sizes, weights, biases, hidden, output })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_batch(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::dims("mlp input", self.input_dim(), x.ncols()));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&x)?;
        let mut h = x.to_owned();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = h.dot(&w.t()) + b;
            self.activation(i).apply(&mut h);
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<Tape> {
        self.check_batch(&x)?;
        let mut layers = Vec::with_capacity(self.weights.len() + 1);
        layers.push(x.to_owned());
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut h = layers[i].dot(&w.t()) + b;
            self.activation(i).apply(&mut h);
            layers.push(h);
        }
        Ok(Tape { layers })
    }

    fn check_upstream(&self, tape: &Tape, grad_out: &ArrayView2<f64>) -> Result<()> {
        let out = tape.output();
        if grad_out.dim() != out.dim() {
            return Err(Error::InvalidInput(format!(
                "upstream gradient shape {:?} does not match output {:?}",
                grad_out.dim(),
                out.dim()
            )));
        }
        Ok(())
    }

    /// Reverse-mode pass. Parameter gradients are summed over the batch rows;
    /// the returned input gradient has one row per batch row.
    pub fn backward(&self, tape: &Tape, grad_out: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>)> {
        self.check_upstream(tape, &grad_out)?;
        let n = self.weights.len();
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        let mut delta = grad_out.to_owned();
        for i in (0..n).rev() {
            self.activation(i).chain(&tape.layers[i + 1], &mut delta);
            weights.push(delta.t().dot(&tape.layers[i]));
            biases.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&self.weights[i]);
        }
        weights.reverse();
        biases.reverse();
        Ok((Gradients { weights, biases }, delta))
    }

    /// Gradient with respect to the input only; skips parameter gradients.
    pub fn input_gradient(&self, tape: &Tape, grad_out: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_upstream(tape, &grad_out)?;
        let mut delta = grad_out.to_owned();
        for i in (0..self.weights.len()).rev() {
            self.activation(i).chain(&tape.layers[i + 1], &mut delta);
            delta = delta.dot(&self.weights[i]);
        }
        Ok(delta)
    }

    /// Single-sample convenience wrapper around [`Mlp::backward`].
    pub fn backward_single(&self, input: &[f64], grad_out: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let tape = self.forward_cached(x)?;
        let g =
            ArrayView2::from_shape((1, grad_out.len()), grad_out).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let (grads, input_grad) = self.backward(&tape, g)?;
        Ok((grads, input_grad.into_raw_vec_and_offset().0))
    }

    /// `self ← tau·self + (1 − tau)·online`.
    pub fn polyak_toward(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if self.layer_sizes != online.layer_sizes {
            return Err(Error::InvalidInput(format!(
                "polyak shape mismatch: {:?} vs {:?}",
                self.layer_sizes, online.layer_sizes
            )));
        }
        for (t, o) in self.weights.iter_mut().zip(&online.weights) {
            t.zip_mut_with(o, |t, &o| *t = tau * *t + (1.0 - tau) * o);
        }
        for (t, o) in self.biases.iter_mut().zip(&online.biases) {
            t.zip_mut_with(o, |t, &o| *t = tau * *t + (1.0 - tau) * o);
        }
        Ok(())
    }
}
