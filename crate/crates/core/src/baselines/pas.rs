use std::time::Instant;

use ndarray::{aview1, concatenate, s, Array1, Array2, ArrayViewMut2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{TaskSpec, Vec3, WorldState, GOAL_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::lookahead::{check_skill_termination, SkillExecutionState};
use crate::nn::{Activation, Adam, AdamConfig, Checkpoint, Mlp};
use crate::rl::{
    stream_rng, streams, AgentConfig, LogRow, Normalizer, ReplayBuffer, RunOptions, TrainConfig, TrainingLog,
    Transition, UpdateStats,
};
use crate::skills::{SkillBundle, SubgoalSampler};

/// PAS-specific settings; everything else comes from [`TrainConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PasConfig {
    /// Probability of a uniformly random meta-action during collection.
    pub random_action_prob: f64,
    /// Multiplier applied to accumulated macro rewards before they enter
    /// the critic targets. Purely a conditioning choice.
    pub reward_scale: f64,
    /// Box the meta-actor's sub-goals are mapped into.
    pub xy_range: [f64; 2],
    pub z_range: [f64; 2],
}

impl Default for PasConfig {
    fn default() -> Self {
        let sampler = SubgoalSampler::default();
        PasConfig { random_action_prob: 0.3, reward_scale: 0.04, xy_range: sampler.xy_range, z_range: sampler.z_range }
    }
}

impl PasConfig {
    /// World coordinates of a sub-goal in actor units (`[-1, 1]^3`).
    pub fn to_world(&self, unit: &Vec3) -> Vec3 {
        let map = |u: f64, [lo, hi]: [f64; 2]| lo + (u.clamp(-1.0, 1.0) + 1.0) * 0.5 * (hi - lo);
        [map(unit[0], self.xy_range), map(unit[1], self.xy_range), map(unit[2], self.z_range)]
    }
}

/// Meta-action: a score per skill and a sub-goal per skill, both in actor
/// units. The executed skill is the argmax of the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PasAction {
    pub skill_logits: Vec<f64>,
    pub subgoals: Vec<Vec3>,
}

impl PasAction {
    /// Splits a raw actor output `[logits(N) | subgoals(3N)]`.
    pub fn from_output(out: &[f64], num_skills: usize) -> Result<Self> {
        if out.len() != num_skills * (1 + GOAL_DIM) {
            return Err(Error::dims("PAS actor output", num_skills * (1 + GOAL_DIM), out.len()));
        }
        let subgoals = out[num_skills..].chunks(GOAL_DIM).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(PasAction { skill_logits: out[..num_skills].to_vec(), subgoals })
    }

    /// Index of the executed skill; ties go to the lowest index.
    pub fn skill(&self) -> usize {
        argmax(&self.skill_logits)
    }

    pub fn subgoal(&self) -> Vec3 {
        self.subgoals[self.skill()]
    }

    /// What the critic sees: the one-hot skill and its sub-goal.
    pub fn critic_encoding(&self) -> Vec<f64> {
        let mut enc = vec![0.0; self.skill_logits.len()];
        enc[self.skill()] = 1.0;
        enc.extend_from_slice(&self.subgoal());
        enc
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// One executed meta-action: a skill run from `start_state` until it
/// terminated or the episode ended.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroTransition {
    pub start_state: Vec<f64>,
    pub goal: Vec<f64>,
    pub action: PasAction,
    /// Sum of primitive rewards over the skill execution.
    pub reward: f64,
    pub end_state: Vec<f64>,
    /// The task goal was reached.
    pub done: bool,
    /// Primitive steps spanned (≥ 1).
    pub steps: usize,
}

impl MacroTransition {
    /// Replay-buffer form with the critic's action encoding and scaled reward.
    pub fn to_transition(&self, reward_scale: f64) -> Transition {
        Transition {
            state: self.start_state.clone(),
            goal: self.goal.clone(),
            action: self.action.critic_encoding(),
            reward: self.reward * reward_scale,
            next_state: self.end_state.clone(),
            done: self.done,
        }
    }
}

/// DDPG meta-controller over [`PasAction`]s.
///
/// The critic takes `(s, g, one-hot skill, active sub-goal)`. The actor is
/// trained through the critic with a straight-through argmax: the gradient
/// with respect to the one-hot goes to the logits unchanged, and the
/// sub-goal gradient goes to the executed skill's slice only.
#[derive(Debug, Clone)]
pub struct PasAgent {
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
    /// Lower clip of critic targets.
    pub target_floor: f64,
    normalize_inputs: bool,
    num_skills: usize,
}

impl PasAgent {
    pub fn new<R: Rng + ?Sized>(num_skills: usize, cfg: &AgentConfig, target_floor: f64, rng: &mut R) -> Result<Self> {
        if num_skills == 0 {
            return Err(Error::InvalidInput("PAS needs at least one skill".into()));
        }
        let sg = OBS_DIM + GOAL_DIM;
        let mut actor_sizes = vec![sg];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(num_skills * (1 + GOAL_DIM));
        let mut critic_sizes = vec![sg + num_skills + GOAL_DIM];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Relu, Activation::Tanh, rng)?;
        let critic = Mlp::new(&critic_sizes, Activation::Relu, Activation::Linear, rng)?;
        Ok(PasAgent {
            actor_opt: Adam::new(&actor, AdamConfig::with_lr(cfg.actor_lr)),
            critic_opt: Adam::new(&critic, AdamConfig::with_lr(cfg.critic_lr)),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            state_norm: Normalizer::new(OBS_DIM),
            goal_norm: Normalizer::new(GOAL_DIM),
            gamma: cfg.gamma,
            polyak: cfg.polyak,
            target_floor,
            normalize_inputs: cfg.normalize_inputs,
            num_skills,
        })
    }

    pub fn num_skills(&self) -> usize {
        self.num_skills
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new();
        ckpt.push_mlp("actor", &self.actor);
        ckpt.push_mlp("critic", &self.critic);
        ckpt.push_mlp("target_actor", &self.target_actor);
        ckpt.push_mlp("target_critic", &self.target_critic);
        ckpt.push_vector("meta", &[self.gamma, self.polyak, self.target_floor, self.num_skills as f64]);
        ckpt.push_vector("state_norm", &self.state_norm.to_vec());
        ckpt.push_vector("goal_norm", &self.goal_norm.to_vec());
        ckpt
    }

    fn normalize(&self, mut x: ArrayViewMut2<f64>) {
        self.state_norm.normalize_columns(x.view_mut(), 0);
        self.goal_norm.normalize_columns(x, OBS_DIM);
    }

    fn input(&self, state: &[f64], goal: &[f64]) -> Result<Vec<f64>> {
        if state.len() != OBS_DIM || goal.len() != GOAL_DIM {
            return Err(Error::InvalidInput("PAS input must be a task observation and goal".into()));
        }
        let mut x = vec![0.0; OBS_DIM + GOAL_DIM];
        self.state_norm.normalize(state, &mut x[..OBS_DIM]);
        self.goal_norm.normalize(goal, &mut x[OBS_DIM..]);
        Ok(x)
    }

    pub fn act(&self, state: &[f64], goal: &[f64]) -> Result<PasAction> {
        PasAction::from_output(&self.actor.forward(&self.input(state, goal)?)?, self.num_skills)
    }

    /// Gaussian noise on every actor output, or with probability
    /// `random_prob` a uniformly random output.
    pub fn act_noisy(
        &self,
        state: &[f64],
        goal: &[f64],
        sigma: f64,
        random_prob: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<PasAction> {
        let width = self.num_skills * (1 + GOAL_DIM);
        if random_prob > 0.0 && rng.random::<f64>() < random_prob {
            let out: Vec<f64> = (0..width).map(|_| rng.random_range(-1.0..=1.0)).collect();
            return PasAction::from_output(&out, self.num_skills);
        }
        let mut out = self.actor.forward(&self.input(state, goal)?)?;
        if sigma > 0.0 {
            let normal =
                Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(format!("noise sigma {sigma}: {e}")))?;
            for v in &mut out {
                *v = (*v + normal.sample(rng)).clamp(-1.0, 1.0);
            }
        }
        PasAction::from_output(&out, self.num_skills)
    }

    pub fn update_normalizers(&mut self, macros: &[MacroTransition]) {
        if !self.normalize_inputs {
            return;
        }
        self.state_norm.update(macros.iter().map(|m| m.start_state.as_slice()));
        self.goal_norm.update(macros.iter().map(|m| m.goal.as_slice()));
    }

    /// One-hot plus executed sub-goal for each row of raw actor outputs.
    fn encode_batch(&self, out: &Array2<f64>) -> (Array2<f64>, Vec<usize>) {
        let n = self.num_skills;
        let mut enc = Array2::zeros((out.nrows(), n + GOAL_DIM));
        let mut chosen = Vec::with_capacity(out.nrows());
        for (i, row) in out.rows().into_iter().enumerate() {
            let k = argmax(&row.slice(s![..n]).to_vec());
            enc[[i, k]] = 1.0;
            enc.row_mut(i).slice_mut(s![n..]).assign(&row.slice(s![n + GOAL_DIM * k..n + GOAL_DIM * (k + 1)]));
            chosen.push(k);
        }
        (enc, chosen)
    }

    /// One DDPG step on replayed macro transitions (actions in critic encoding).
    pub fn update(&mut self, batch: &[&Transition]) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let n = batch.len();
        let sg = OBS_DIM + GOAL_DIM;
        let adim = self.num_skills + GOAL_DIM;
        let mut x = Array2::zeros((n, sg));
        let mut x_next = Array2::zeros((n, sg));
        let mut actions = Array2::zeros((n, adim));
        let mut rewards = Array1::zeros(n);
        let mut not_done = Array1::zeros(n);
        for (i, t) in batch.iter().enumerate() {
            if t.state.len() != OBS_DIM
                || t.next_state.len() != OBS_DIM
                || t.goal.len() != GOAL_DIM
                || t.action.len() != adim
            {
                return Err(Error::InvalidInput(format!("macro transition {i} has wrong dimensions")));
            }
            x.row_mut(i).slice_mut(s![..OBS_DIM]).assign(&aview1(&t.state));
            x.row_mut(i).slice_mut(s![OBS_DIM..]).assign(&aview1(&t.goal));
            x_next.row_mut(i).slice_mut(s![..OBS_DIM]).assign(&aview1(&t.next_state));
            x_next.row_mut(i).slice_mut(s![OBS_DIM..]).assign(&aview1(&t.goal));
            actions.row_mut(i).assign(&aview1(&t.action));
            rewards[i] = t.reward;
            not_done[i] = if t.done { 0.0 } else { 1.0 };
        }
        self.normalize(x.view_mut());
        self.normalize(x_next.view_mut());

        let (next_enc, _) = self.encode_batch(&self.target_actor.forward_batch(x_next.view())?);
        let next_in = concatenate(Axis(1), &[x_next.view(), next_enc.view()]).unwrap();
        let next_q = self.target_critic.forward_batch(next_in.view())?;
        let floor = self.target_floor;
        let targets: Array1<f64> =
            (&rewards + &(&next_q.column(0) * &not_done * self.gamma)).mapv(|y| y.clamp(floor, 0.0));

        let critic_in = concatenate(Axis(1), &[x.view(), actions.view()]).unwrap();
        let tape = self.critic.forward_cached(critic_in.view())?;
        let err = &tape.output().column(0) - &targets;
        let critic_loss = err.mapv(|e| e * e).mean().unwrap();
        if !critic_loss.is_finite() {
            return Err(Error::Divergence(format!("PAS critic loss {critic_loss}")));
        }
        let grad_out = (err * (2.0 / n as f64)).insert_axis(Axis(1));
        let (critic_grads, _) = self.critic.backward(&tape, grad_out.view())?;
        self.critic_opt.step(&mut self.critic, &critic_grads)?;

        let actor_tape = self.actor.forward_cached(x.view())?;
        let (enc, chosen) = self.encode_batch(actor_tape.output());
        let pi_in = concatenate(Axis(1), &[x.view(), enc.view()]).unwrap();
        let q_tape = self.critic.forward_cached(pi_in.view())?;
        let actor_loss = -q_tape.output().column(0).mean().unwrap();
        if !actor_loss.is_finite() {
            return Err(Error::Divergence(format!("PAS actor loss {actor_loss}")));
        }
        let upstream = Array2::from_elem((n, 1), -1.0 / n as f64);
        let d_in = self.critic.input_gradient(&q_tape, upstream.view())?;
        let ns = self.num_skills;
        let mut d_out = Array2::zeros(actor_tape.output().raw_dim());
        for (i, &k) in chosen.iter().enumerate() {
            d_out.row_mut(i).slice_mut(s![..ns]).assign(&d_in.slice(s![i, sg..sg + ns]));
            d_out
                .row_mut(i)
                .slice_mut(s![ns + GOAL_DIM * k..ns + GOAL_DIM * (k + 1)])
                .assign(&d_in.slice(s![i, sg + ns..]));
        }
        let (actor_grads, _) = self.actor.backward(&actor_tape, d_out.view())?;
        self.actor_opt.step(&mut self.actor, &actor_grads)?;

        self.target_actor.polyak_toward(&self.actor, self.polyak)?;
        self.target_critic.polyak_toward(&self.critic, self.polyak)?;
        Ok(UpdateStats { critic_loss, actor_loss })
    }
}

/// Runs one episode in which every decision is a meta-action executed by
/// the chosen skill's policy until the skill terminates.
pub fn run_pas_episode<F>(
    task: &TaskSpec,
    bundles: &[SkillBundle],
    pas: &PasConfig,
    start: WorldState,
    goal: &[f64],
    mut choose: F,
) -> Result<(Vec<MacroTransition>, bool)>
where
    F: FnMut(&[f64], &[f64]) -> Result<PasAction>,
{
    let mut state = start;
    let mut macros = Vec::new();
    loop {
        let start_obs = task.observe(&state);
        let action = choose(&start_obs, goal)?;
        let skill = action.skill();
        let mut exec = SkillExecutionState {
            skill,
            subgoal: pas.to_world(&action.subgoal()),
            steps_in_skill: 0,
            terminated: false,
        };
        let bundle = &bundles[skill];
        let mut reward = 0.0;
        let (ended, success) = loop {
            let obs = task.observe(&state);
            let a = bundle.policy.act(&obs, &exec.subgoal)?;
            let result = task.step(&state, goal, &a)?;
            reward += result.reward;
            exec.steps_in_skill += 1;
            state = result.next_state;
            if result.done {
                break (true, result.reward == 0.0);
            }
            if check_skill_termination(&exec, bundle, &task.observe(&state), task, goal) {
                break (false, false);
            }
        };
        macros.push(MacroTransition {
            start_state: start_obs,
            goal: goal.to_vec(),
            action,
            reward,
            end_state: task.observe(&state),
            done: success,
            steps: exec.steps_in_skill,
        });
        if ended {
            return Ok((macros, success));
        }
    }
}

pub struct PasOutcome {
    pub agent: PasAgent,
    pub log: TrainingLog,
    pub episode_seconds: Vec<f64>,
    pub early_stopped: bool,
}

/// Trains a PAS meta-controller on `task` over the given skills with the
/// same epoch/cycle/evaluation protocol and RNG streams as HER.
pub fn pas_train(
    task: &TaskSpec,
    bundles: &[SkillBundle],
    cfg: &TrainConfig,
    pas: &PasConfig,
    seed: u64,
    opts: &RunOptions,
) -> Result<PasOutcome> {
    cfg.validate()?;
    if bundles.is_empty() {
        return Err(Error::InvalidInput("PAS needs at least one skill bundle".into()));
    }
    let max_skill_steps = bundles.iter().map(|b| b.max_skill_steps).max().unwrap_or(1) as f64;
    let floor = -max_skill_steps * pas.reward_scale / (1.0 - cfg.gamma);
    let mut env_rng = stream_rng(seed, streams::ENV);
    let mut noise_rng = stream_rng(seed, streams::NOISE);
    let mut replay_rng = stream_rng(seed, streams::REPLAY);
    let mut eval_rng = stream_rng(seed, streams::EVAL);
    let mut agent = PasAgent::new(bundles.len(), &cfg.agent_config(), floor, &mut stream_rng(seed, streams::INIT))?;
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut log = TrainingLog::default();
    let mut episode_seconds = Vec::new();
    let mut early_stopped = false;
    let mut episodes_done = 0;
    let started = Instant::now();

    for epoch in 0..opts.epochs {
        let (mut actor_loss, mut critic_loss, mut updates) = (0.0, 0.0, 0usize);
        let mut collect_time = 0.0;
        for cycle in 0..cfg.cycles_per_epoch {
            for _ in 0..cfg.episodes_in_cycle(cycle) {
                let t0 = Instant::now();
                let (state, goal) = task.reset_with(&mut env_rng);
                let (macros, _) = run_pas_episode(task, bundles, pas, state, &goal, |s, g| {
                    agent.act_noisy(s, g, cfg.action_noise_sigma, pas.random_action_prob, &mut noise_rng)
                })?;
                collect_time += t0.elapsed().as_secs_f64();
                agent.update_normalizers(&macros);
                buffer.extend(macros.iter().map(|m| m.to_transition(pas.reward_scale)));
                episodes_done += 1;
            }
            if buffer.is_empty() {
                continue;
            }
            for _ in 0..cfg.updates_per_cycle {
                let batch = buffer.sample(cfg.batch_size, &mut replay_rng);
                let stats = agent.update(&batch)?;
                actor_loss += stats.actor_loss;
                critic_loss += stats.critic_loss;
                updates += 1;
            }
        }
        let mut successes = 0;
        for _ in 0..cfg.eval_episodes {
            let (state, goal) = task.reset_with(&mut eval_rng);
            let (_, success) = run_pas_episode(task, bundles, pas, state, &goal, |s, g| agent.act(s, g))?;
            successes += usize::from(success);
        }
        let success_rate = if cfg.eval_episodes == 0 { 0.0 } else { successes as f64 / cfg.eval_episodes as f64 };
        let denom = updates.max(1) as f64;
        log.rows.push(LogRow {
            epoch,
            episodes: episodes_done,
            success_rate,
            mean_actor_loss: actor_loss / denom,
            mean_critic_loss: critic_loss / denom,
            epsilon: 0.0,
            wall_clock_s: started.elapsed().as_secs_f64(),
            method: opts.method.clone(),
        });
        episode_seconds.push(collect_time / cfg.episodes_per_epoch as f64);
        log::debug!("{} epoch {epoch}: success {success_rate:.2}", opts.method);
        if opts.stop_at_success.is_some_and(|t| success_rate >= t) && epoch + 1 < opts.epochs {
            early_stopped = true;
            break;
        }
    }
    Ok(PasOutcome { agent, log, episode_seconds, early_stopped })
}
