use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig { learning_rate, ..Default::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps_hat: 1e-8 }
    }
}

/// Adam optimizer state for one [`Mlp`]. Moment buffers mirror the parameter shapes.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step_count: u64,
    first: Gradients,
    second: Gradients,
}

impl Adam {
    pub fn new(mlp: &Mlp, config: AdamConfig) -> Self {
        Adam { config, step_count: 0, first: Gradients::zeros_like(mlp), second: Gradients::zeros_like(mlp) }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one bias-corrected Adam update. Non-finite gradients leave the
    /// parameters and state untouched and report divergence.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != self.first.weights.len()
            || grads.weights.iter().zip(&self.first.weights).any(|(g, m)| g.dim() != m.dim())
            || grads.biases.iter().zip(&self.first.biases).any(|(g, m)| g.dim() != m.dim())
        {
            return Err(Error::InvalidInput("gradient shapes do not match optimizer state".into()));
        }
        if !grads.all_finite() {
            return Err(Error::Divergence(format!("non-finite gradient at Adam step {}", self.step_count + 1)));
        }
        self.step_count += 1;
        let AdamConfig { learning_rate, beta1, beta2, eps_hat } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + eps_hat);
        };
        for (i, w) in mlp.weights_mut().iter_mut().enumerate() {
            let g = &grads.weights[i];
            let m = &mut self.first.weights[i];
            let v = &mut self.second.weights[i];
            ndarray::Zip::from(w).and(g).and(m).and(v).for_each(|p, &g, m, v| update(p, g, m, v));
        }
        for (i, b) in mlp.biases_mut().iter_mut().enumerate() {
            let g = &grads.biases[i];
            let m = &mut self.first.biases[i];
            let v = &mut self.second.biases[i];
            ndarray::Zip::from(b).and(g).and(m).and(v).for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_net(w: f64) -> Mlp {
        Mlp::from_parts(vec![array![[w]]], vec![array![0.0]], Activation::Relu, Activation::Linear).unwrap()
    }

    fn grads_of(w: f64, b: f64) -> Gradients {
        Gradients { weights: vec![array![[w]]], biases: vec![array![b]] }
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Mlp::new(&[4, 8, 2], Activation::Relu, Activation::Tanh, &mut rng).unwrap();
        let before = net.clone();
        let mut adam = Adam::new(&net, AdamConfig::default());
        let zero = Gradients::zeros_like(&net);
        for _ in 0..10 {
            adam.step(&mut net, &zero).unwrap();
        }
        assert_eq!(net, before);
        assert_eq!(adam.step_count(), 10);
    }

    #[test]
    fn first_step_has_unit_magnitude() {
        // m̂ = 1 and v̂ = 1 after bias correction, so Δ = −lr·1/(1 + ε̂).
        let mut net = scalar_net(0.0);
        let mut adam = Adam::new(&net, AdamConfig::with_lr(1e-3));
        adam.step(&mut net, &grads_of(1.0, 0.0)).unwrap();
        let delta = net.weights()[0][[0, 0]];
        assert!((delta + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15, "{delta}");
    }

    #[test]
    fn constant_gradient_descends() {
        let mut net = scalar_net(1.0);
        let mut adam = Adam::new(&net, AdamConfig::with_lr(1e-2));
        for _ in 0..100 {
            adam.step(&mut net, &grads_of(0.5, -2.0)).unwrap();
        }
        assert!(net.weights()[0][[0, 0]] < 1.0);
        assert!(net.biases()[0][0] > 0.0);
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut net = scalar_net(1.0);
        let before = net.clone();
        let mut adam = Adam::new(&net, AdamConfig::default());
        let err = adam.step(&mut net, &grads_of(f64::NAN, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
        assert_eq!(net, before);
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut net = scalar_net(1.0);
        let mut adam = Adam::new(&net, AdamConfig::default());
        let bad = Gradients { weights: vec![array![[1.0, 2.0]]], biases: vec![array![0.0]] };
        assert!(matches!(adam.step(&mut net, &bad), Err(Error::InvalidInput(_))));
    }
}
