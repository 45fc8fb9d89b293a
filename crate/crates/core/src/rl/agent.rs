use std::path::Path;

use ndarray::{aview1, concatenate, s, Array1, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::normalizer::Normalizer;
use super::replay::Transition;
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Checkpoint, Mlp};

/// Hyper-parameters an [`ActorCritic`] is built with.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub polyak: f64,
    /// Standardize state and goal inputs with running statistics.
    pub normalize_inputs: bool,
    /// Weight of the `mean(a²)` penalty added to the actor loss.
    pub action_l2: f64,
}

/// Goal-conditioned deterministic actor `π(s, g)` and critic `Q(s, g, a)`
/// with polyak-averaged target copies. States and goals pass through running
/// normalizers before reaching either network.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub state_norm: Normalizer,
    pub goal_norm: Normalizer,
    actor_opt: Adam,
    critic_opt: Adam,
    pub gamma: f64,
    pub polyak: f64,
    pub normalize_inputs: bool,
    pub action_l2: f64,
    state_dim: usize,
    goal_dim: usize,
    action_dim: usize,
}

/// Losses reported by one [`ActorCritic::ddpg_update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        goal_dim: usize,
        action_dim: usize,
        cfg: &AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut actor_sizes = vec![state_dim + goal_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![state_dim + goal_dim + action_dim];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Relu, Activation::Tanh, rng)?;
        let critic = Mlp::new(&critic_sizes, Activation::Relu, Activation::Linear, rng)?;
        Ok(Self::from_networks(actor, critic, cfg, state_dim, goal_dim))
    }

    fn from_networks(actor: Mlp, critic: Mlp, cfg: &AgentConfig, state_dim: usize, goal_dim: usize) -> Self {
        let action_dim = actor.output_dim();
        ActorCritic {
            actor_opt: Adam::new(&actor, AdamConfig::with_lr(cfg.actor_lr)),
            critic_opt: Adam::new(&critic, AdamConfig::with_lr(cfg.critic_lr)),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            state_norm: Normalizer::new(state_dim),
            goal_norm: Normalizer::new(goal_dim),
            actor,
            critic,
            gamma: cfg.gamma,
            polyak: cfg.polyak,
            normalize_inputs: cfg.normalize_inputs,
            action_l2: cfg.action_l2,
            state_dim,
            goal_dim,
            action_dim,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn goal_dim(&self) -> usize {
        self.goal_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Bounds applied to critic targets: `[−1/(1−γ), 0]`.
    pub fn target_bounds(&self) -> (f64, f64) {
        (-1.0 / (1.0 - self.gamma), 0.0)
    }

    fn actor_input(&self, state: &[f64], goal: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::dims("state", self.state_dim, state.len()));
        }
        if goal.len() != self.goal_dim {
            return Err(Error::dims("goal", self.goal_dim, goal.len()));
        }
        let mut x = vec![0.0; state.len() + goal.len()];
        self.state_norm.normalize(state, &mut x[..state.len()]);
        self.goal_norm.normalize(goal, &mut x[state.len()..]);
        Ok(x)
    }

    /// Folds the states and goals of `transitions` into the input statistics.
    pub fn update_normalizers(&mut self, transitions: &[Transition]) {
        if !self.normalize_inputs {
            return;
        }
        self.state_norm.update(transitions.iter().map(|t| t.state.as_slice()));
        self.goal_norm.update(transitions.iter().map(|t| t.goal.as_slice()));
    }

    /// Normalizes raw `[s | g]` rows in place.
    pub fn normalize_inputs(&self, mut x: ArrayViewMut2<f64>) {
        self.state_norm.normalize_columns(x.view_mut(), 0);
        self.goal_norm.normalize_columns(x, self.state_dim);
    }

    /// Deterministic policy action `π(s, g)`.
    pub fn act(&self, state: &[f64], goal: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(&self.actor_input(state, goal)?)
    }

    /// `clip(π(s, g) + N(0, σ²I), −1, 1)`.
    pub fn act_noisy<R: Rng + ?Sized>(&self, state: &[f64], goal: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.act(state, goal)?;
        if sigma > 0.0 {
            let normal =
                Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(format!("noise sigma {sigma}: {e}")))?;
            for v in &mut a {
                *v = (*v + normal.sample(rng)).clamp(-1.0, 1.0);
            }
        }
        Ok(a)
    }

    pub fn q_value(&self, state: &[f64], goal: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim {
            return Err(Error::dims("action", self.action_dim, action.len()));
        }
        let mut x = self.actor_input(state, goal)?;
        x.extend_from_slice(action);
        Ok(self.critic.forward(&x)?[0])
    }

    /// `Q(s, g, π(s, g))` for a batch of raw `[s | g]` rows.
    pub fn value_batch(&self, inputs: ArrayView2<f64>) -> Result<Array1<f64>> {
        if inputs.ncols() != self.state_dim + self.goal_dim {
            return Err(Error::dims("state+goal", self.state_dim + self.goal_dim, inputs.ncols()));
        }
        let mut x = inputs.to_owned();
        self.normalize_inputs(x.view_mut());
        self.value_batch_normalized(x.view())
    }

    /// Batched policy actions for raw `[s | g]` rows.
    pub fn act_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        if inputs.ncols() != self.state_dim + self.goal_dim {
            return Err(Error::dims("state+goal", self.state_dim + self.goal_dim, inputs.ncols()));
        }
        let mut x = inputs.to_owned();
        self.normalize_inputs(x.view_mut());
        self.actor.forward_batch(x.view())
    }

    fn value_batch_normalized(&self, inputs: ArrayView2<f64>) -> Result<Array1<f64>> {
        let a = self.actor.forward_batch(inputs)?;
        let x = concatenate(Axis(1), &[inputs, a.view()]).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(self.critic.forward_batch(x.view())?.column(0).to_owned())
    }

    /// `Q(s, g, π(s, g))`.
    pub fn value(&self, state: &[f64], goal: &[f64]) -> Result<f64> {
        let a = self.act(state, goal)?;
        self.q_value(state, goal, &a)
    }

    /// One DDPG step on a batch: critic regression onto clipped TD targets,
    /// actor ascent on `Q(s, g, π(s, g))`, then polyak target updates.
    pub fn ddpg_update(&mut self, batch: &[&Transition]) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let n = batch.len();
        let sg = self.state_dim + self.goal_dim;
        let mut x = Array2::zeros((n, sg));
        let mut x_next = Array2::zeros((n, sg));
        let mut actions = Array2::zeros((n, self.action_dim));
        let mut rewards = Array1::zeros(n);
        let mut not_done = Array1::zeros(n);
        for (i, t) in batch.iter().enumerate() {
            if t.state.len() != self.state_dim
                || t.next_state.len() != self.state_dim
                || t.goal.len() != self.goal_dim
                || t.action.len() != self.action_dim
            {
                return Err(Error::InvalidInput(format!("transition {i} has wrong dimensions")));
            }
            x.row_mut(i).slice_mut(s![..self.state_dim]).assign(&aview1(&t.state));
            x.row_mut(i).slice_mut(s![self.state_dim..]).assign(&aview1(&t.goal));
            x_next.row_mut(i).slice_mut(s![..self.state_dim]).assign(&aview1(&t.next_state));
            x_next.row_mut(i).slice_mut(s![self.state_dim..]).assign(&aview1(&t.goal));
            actions.row_mut(i).assign(&aview1(&t.action));
            rewards[i] = t.reward;
            not_done[i] = if t.done { 0.0 } else { 1.0 };
        }
        self.normalize_inputs(x.view_mut());
        self.normalize_inputs(x_next.view_mut());

        let (lo, hi) = self.target_bounds();
        let next_actions = self.target_actor.forward_batch(x_next.view())?;
        let next_in = concatenate(Axis(1), &[x_next.view(), next_actions.view()]).unwrap();
        let next_q = self.target_critic.forward_batch(next_in.view())?;
        let targets: Array1<f64> = (&rewards + &(&next_q.column(0) * &not_done * self.gamma)).mapv(|y| y.clamp(lo, hi));

        let critic_in = concatenate(Axis(1), &[x.view(), actions.view()]).unwrap();
        let tape = self.critic.forward_cached(critic_in.view())?;
        let err = &tape.output().column(0) - &targets;
        let critic_loss = err.mapv(|e| e * e).mean().unwrap();
        if !critic_loss.is_finite() {
            return Err(self.divergence("critic", critic_loss, &targets));
        }
        let grad_out = (err * (2.0 / n as f64)).insert_axis(Axis(1));
        let (critic_grads, _) = self.critic.backward(&tape, grad_out.view())?;
        self.critic_opt.step(&mut self.critic, &critic_grads)?;

        let actor_tape = self.actor.forward_cached(x.view())?;
        let pi_in = concatenate(Axis(1), &[x.view(), actor_tape.output().view()]).unwrap();
        let q_tape = self.critic.forward_cached(pi_in.view())?;
        let pi = actor_tape.output();
        let l2_scale = self.action_l2 / (n * self.action_dim) as f64;
        let actor_loss = -q_tape.output().column(0).mean().unwrap() + l2_scale * pi.mapv(|a| a * a).sum();
        if !actor_loss.is_finite() {
            return Err(self.divergence("actor", actor_loss, &targets));
        }
        let upstream = Array2::from_elem((n, 1), -1.0 / n as f64);
        let dq_dinput = self.critic.input_gradient(&q_tape, upstream.view())?;
        let dq_daction = &dq_dinput.slice(s![.., sg..]) + &(pi * (2.0 * l2_scale));
        let (actor_grads, _) = self.actor.backward(&actor_tape, dq_daction.view())?;
        self.actor_opt.step(&mut self.actor, &actor_grads)?;

        self.target_actor.polyak_toward(&self.actor, self.polyak)?;
        self.target_critic.polyak_toward(&self.critic, self.polyak)?;
        Ok(UpdateStats { critic_loss, actor_loss })
    }

    fn divergence(&self, which: &str, loss: f64, targets: &Array1<f64>) -> Error {
        let finite_targets = targets.iter().filter(|v| v.is_finite()).count();
        Error::Divergence(format!(
            "{which} loss {loss} after {} critic / {} actor steps; {finite_targets}/{} finite targets",
            self.critic_opt.step_count(),
            self.actor_opt.step_count(),
            targets.len()
        ))
    }

    pub fn to_checkpoint(&self, prefix: &str) -> Checkpoint {
        let mut ckpt = Checkpoint::new();
        self.write_into(&mut ckpt, prefix);
        ckpt
    }

    pub fn write_into(&self, ckpt: &mut Checkpoint, prefix: &str) {
        ckpt.push_mlp(&format!("{prefix}actor"), &self.actor);
        ckpt.push_mlp(&format!("{prefix}critic"), &self.critic);
        ckpt.push_mlp(&format!("{prefix}target_actor"), &self.target_actor);
        ckpt.push_mlp(&format!("{prefix}target_critic"), &self.target_critic);
        ckpt.push_vector(
            format!("{prefix}meta"),
            &[self.gamma, self.polyak, self.state_dim as f64, self.goal_dim as f64],
        );
        ckpt.push_vector(format!("{prefix}state_norm"), &self.state_norm.to_vec());
        ckpt.push_vector(format!("{prefix}goal_norm"), &self.goal_norm.to_vec());
    }

    /// Restores networks from a checkpoint; optimizer state starts fresh.
    pub fn read_from(ckpt: &Checkpoint, prefix: &str, cfg: &AgentConfig) -> Result<Self> {
        let meta = ckpt.vector(&format!("{prefix}meta"))?;
        let [gamma, polyak, state_dim, goal_dim] = meta[..] else {
            return Err(Error::CorruptCheckpoint("bad agent metadata".into()));
        };
        let actor = ckpt.mlp(&format!("{prefix}actor"))?;
        let critic = ckpt.mlp(&format!("{prefix}critic"))?;
        let cfg = AgentConfig { gamma, polyak, ..cfg.clone() };
        let mut ac = Self::from_networks(actor, critic, &cfg, state_dim as usize, goal_dim as usize);
        ac.target_actor = ckpt.mlp(&format!("{prefix}target_actor"))?;
        ac.target_critic = ckpt.mlp(&format!("{prefix}target_critic"))?;
        let norm = |name: &str, dim: usize| {
            Normalizer::from_vec(dim, &ckpt.vector(&format!("{prefix}{name}"))?)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("bad {name} block")))
        };
        ac.state_norm = norm("state_norm", ac.state_dim)?;
        ac.goal_norm = norm("goal_norm", ac.goal_dim)?;
        Ok(ac)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint("").save(path)
    }

    pub fn load(path: &Path, cfg: &AgentConfig) -> Result<Self> {
        Self::read_from(&Checkpoint::load(path)?, "", cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> AgentConfig {
        AgentConfig {
            hidden: vec![16, 16],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            gamma: 0.98,
            polyak: 0.95,
            normalize_inputs: false,
            action_l2: 0.0,
        }
    }

    fn agent(seed: u64) -> ActorCritic {
        ActorCritic::new(3, 2, 2, &cfg(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn zero_net(sizes: &[usize], out: Activation) -> Mlp {
        let mut m = Mlp::new(sizes, Activation::Relu, out, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        m.weights_mut().iter_mut().for_each(|w| w.fill(0.0));
        m
    }

    fn transition(reward: f64, done: bool) -> Transition {
        Transition {
            state: vec![0.1, 0.2, 0.3],
            goal: vec![0.4, 0.5],
            action: vec![0.1, -0.1],
            reward,
            next_state: vec![0.2, 0.2, 0.3],
            done,
        }
    }

    #[test]
    fn zero_sigma_is_deterministic_policy() {
        let ac = agent(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = [0.1, 0.2, 0.3];
        let g = [0.5, 0.5];
        assert_eq!(ac.act_noisy(&s, &g, 0.0, &mut rng).unwrap(), ac.act(&s, &g).unwrap());
    }

    #[test]
    fn noisy_actions_stay_in_bounds_and_reproduce() {
        let ac = agent(2);
        let s = [0.1, 0.2, 0.3];
        let g = [0.5, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = ac.act_noisy(&s, &g, 10.0, &mut rng).unwrap();
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        let a1 = ac.act_noisy(&s, &g, 0.2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let a2 = ac.act_noisy(&s, &g, 0.2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn zero_reward_and_zero_q_gives_zero_loss() {
        let mut ac = agent(3);
        ac.critic = zero_net(&[7, 16, 16, 1], Activation::Linear);
        ac.target_critic = ac.critic.clone();
        let batch = [transition(0.0, false), transition(0.0, true)];
        let refs: Vec<&Transition> = batch.iter().collect();
        let stats = ac.ddpg_update(&refs).unwrap();
        assert_eq!(stats.critic_loss, 0.0);
    }

    #[test]
    fn targets_are_clipped_to_lower_bound() {
        // Target critic pinned at −100 via its bias; y = −1 + 0.98·(−100) clips to −50.
        let mut ac = agent(4);
        ac.critic = zero_net(&[7, 16, 16, 1], Activation::Linear);
        ac.target_critic = ac.critic.clone();
        ac.target_critic.biases_mut()[2] = array![-100.0];
        let batch = [transition(-1.0, false)];
        let stats = ac.ddpg_update(&[&batch[0]]).unwrap();
        // Online critic outputs 0, target is −50: squared error 2500.
        assert!((stats.critic_loss - 2500.0).abs() < 1e-9, "{}", stats.critic_loss);
        assert!((ac.target_bounds().0 + 50.0).abs() < 1e-12);
    }

    #[test]
    fn actor_climbs_linear_critic() {
        // Q = w·a through a single linear critic layer.
        let mut ac = agent(6);
        let w = [0.7, -1.3];
        let mut critic = Mlp::from_parts(
            vec![array![[0.0, 0.0, 0.0, 0.0, 0.0, w[0], w[1]]]],
            vec![array![0.0]],
            Activation::Relu,
            Activation::Linear,
        )
        .unwrap();
        critic.biases_mut()[0] = array![0.0];
        ac.critic = critic.clone();
        ac.target_critic = critic;
        ac.critic_opt = Adam::new(&ac.critic, AdamConfig::with_lr(0.0));
        let batch = [transition(0.0, true)];
        let s = batch[0].state.clone();
        let g = batch[0].goal.clone();
        let before: f64 = ac.act(&s, &g).unwrap().iter().zip(w).map(|(a, w)| a * w).sum();
        for _ in 0..20 {
            ac.ddpg_update(&[&batch[0]]).unwrap();
        }
        let after: f64 = ac.act(&s, &g).unwrap().iter().zip(w).map(|(a, w)| a * w).sum();
        assert!(after > before, "{before} -> {after}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let ac = agent(7);
        let ckpt = ac.to_checkpoint("x.");
        let bytes = ckpt.to_bytes();
        let back = ActorCritic::read_from(&Checkpoint::from_bytes(&bytes).unwrap(), "x.", &cfg()).unwrap();
        assert_eq!(back.actor, ac.actor);
        assert_eq!(back.target_critic, ac.target_critic);
        assert_eq!(back.state_dim(), 3);
    }
}
