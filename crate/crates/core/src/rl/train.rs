use std::io::{Read, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{ActorCritic, AgentConfig};
use super::her::her_relabel;
use super::replay::{ReplayBuffer, Transition};
use super::space::{GoalTask, Space};
use crate::env::{TaskSpec, WorldState};
use crate::error::{Error, Result};

/// Seeded RNG for one purpose within a run; streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub mod streams {
    pub const ENV: u64 = 0;
    pub const INIT: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const EXPLORER: u64 = 5;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub cycles_per_epoch: usize,
    pub updates_per_cycle: usize,
    pub episodes_per_epoch: usize,
    pub eval_episodes: usize,
    pub gamma: f64,
    pub polyak: f64,
    pub action_noise_sigma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the run over which ε decays linearly; constant afterwards.
    pub epsilon_decay_fraction: f64,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    /// Standardize actor/critic inputs with running statistics.
    pub normalize_inputs: bool,
    /// Actor penalty on `mean(a²)`.
    pub action_l2: f64,
    /// Probability of a uniformly random action under Gaussian exploration.
    pub random_action_prob: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            actor_lr: 1e-3,
            critic_lr: 1e-4,
            batch_size: 128,
            cycles_per_epoch: 20,
            updates_per_cycle: 40,
            episodes_per_epoch: 16,
            eval_episodes: 20,
            gamma: 0.98,
            polyak: 0.95,
            action_noise_sigma: 0.2,
            epsilon_start: 1.0,
            epsilon_end: 0.001,
            epsilon_decay_fraction: 0.5,
            replay_capacity: 1_000_000,
            hidden: vec![64, 64, 64],
            normalize_inputs: true,
            action_l2: 0.0,
            random_action_prob: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("gamma", self.gamma),
            ("polyak", self.polyak),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| v.is_nan() || *v <= 0.0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.gamma >= 1.0 {
            return Err(Error::Config("gamma must be below 1".into()));
        }
        if self.batch_size == 0
            || self.cycles_per_epoch == 0
            || self.episodes_per_epoch == 0
            || self.replay_capacity == 0
            || self.hidden.is_empty()
        {
            return Err(Error::Config("batch, cycle, episode and replay sizes must be positive".into()));
        }
        if self.epsilon_end > self.epsilon_start || self.epsilon_end < 0.0 || self.epsilon_start > 1.0 {
            return Err(Error::Config("epsilon must decay within [0, 1]".into()));
        }
        if self.action_noise_sigma < 0.0 {
            return Err(Error::Config("action_noise_sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            hidden: self.hidden.clone(),
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            gamma: self.gamma,
            polyak: self.polyak,
            normalize_inputs: self.normalize_inputs,
            action_l2: self.action_l2,
        }
    }

    /// ε for the given training episode, linear from start to end over the
    /// first `epsilon_decay_fraction` of all episodes.
    pub fn epsilon_at(&self, episode: usize, total_episodes: usize) -> f64 {
        let horizon = (self.epsilon_decay_fraction * total_episodes as f64).max(1.0);
        let frac = (episode as f64 / horizon).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    /// Pins ε to zero for the whole run.
    pub fn without_lookahead(mut self) -> Self {
        self.epsilon_start = 0.0;
        self.epsilon_end = 0.0;
        self
    }

    pub(crate) fn episodes_in_cycle(&self, cycle: usize) -> usize {
        let (e, c) = (self.episodes_per_epoch, self.cycles_per_epoch);
        (cycle + 1) * e / c - cycle * e / c
    }
}

/// What an exploration strategy sees at each primitive step.
pub struct StepContext<'a> {
    pub task: &'a TaskSpec,
    pub state: &'a WorldState,
    pub task_obs: &'a [f64],
    pub agent_obs: &'a [f64],
    pub goal: &'a [f64],
}

/// Behaviour policy used while collecting training episodes.
pub trait Exploration {
    fn begin_episode(&mut self, _epsilon: f64) {}

    /// Agent-space action for the current step. `ctx.state` is the state
    /// reached by the previous action, so strategies with temporally extended
    /// behaviour check for termination here.
    fn act(&mut self, ctx: &StepContext<'_>, agent: &ActorCritic, noise: &mut ChaCha8Rng) -> Result<Vec<f64>>;

    /// ε currently in effect (0 when the strategy has no look-ahead gate).
    fn epsilon(&self) -> f64 {
        0.0
    }
}

/// `a = clip(π(s, g) + N(0, σ²I))`.
#[derive(Debug, Clone)]
pub struct GaussianExploration {
    pub sigma: f64,
    /// Probability of replacing the action with a uniform draw from `[-1, 1]^d`.
    pub random_prob: f64,
}

impl GaussianExploration {
    pub fn new(sigma: f64) -> Self {
        GaussianExploration { sigma, random_prob: 0.0 }
    }

    pub fn from_config(cfg: &TrainConfig) -> Self {
        GaussianExploration { sigma: cfg.action_noise_sigma, random_prob: cfg.random_action_prob }
    }
}

impl Exploration for GaussianExploration {
    fn act(&mut self, ctx: &StepContext<'_>, agent: &ActorCritic, noise: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        if self.random_prob > 0.0 && noise.random::<f64>() < self.random_prob {
            return Ok((0..agent.action_dim()).map(|_| noise.random_range(-1.0..=1.0)).collect());
        }
        agent.act_noisy(ctx.agent_obs, ctx.goal, self.sigma, noise)
    }
}

/// Runs one episode with `behaviour` choosing agent-space actions.
pub fn run_episode<F>(
    env: &GoalTask,
    state: WorldState,
    goal: &[f64],
    mut behaviour: F,
) -> Result<(Vec<Transition>, bool)>
where
    F: FnMut(&StepContext<'_>, &WorldState) -> Result<Vec<f64>>,
{
    let mut state = state;
    let mut episode = Vec::with_capacity(env.task.max_episode_steps());
    loop {
        let task_obs = env.task.observe(&state);
        let agent_obs = env.space.project(&task_obs);
        let ctx = StepContext { task: &env.task, state: &state, task_obs: &task_obs, agent_obs: &agent_obs, goal };
        let action = behaviour(&ctx, &state)?;
        let result = env.task.step(&state, goal, &env.space.embed_action(&action))?;
        let next_obs = env.observe(&result.next_state);
        let success = result.reward == 0.0;
        episode.push(Transition {
            state: agent_obs,
            goal: goal.to_vec(),
            action,
            reward: result.reward,
            next_state: next_obs,
            done: success,
        });
        state = result.next_state;
        if result.done {
            return Ok((episode, success));
        }
    }
}

/// Fraction of `episodes` frozen-policy rollouts that reach their goal.
pub fn evaluate(agent: &ActorCritic, env: &GoalTask, episodes: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    if episodes == 0 {
        return Ok(0.0);
    }
    let mut successes = 0;
    for _ in 0..episodes {
        let (state, goal) = env.task.reset_with(rng);
        let (_, success) = run_episode(env, state, &goal, |ctx, _| agent.act(ctx.agent_obs, ctx.goal))?;
        successes += usize::from(success);
    }
    Ok(successes as f64 / episodes as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_actor_loss: f64,
    pub mean_critic_loss: f64,
    pub epsilon: f64,
    pub wall_clock_s: f64,
    pub method: String,
}

/// Per-epoch training log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let rows = reader.deserialize().collect::<std::result::Result<Vec<LogRow>, _>>()?;
        Ok(TrainingLog { rows })
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// The log as CSV without the wall-clock column and method label, for
    /// reproducibility comparisons.
    pub fn deterministic_csv(&self) -> String {
        let mut out = String::from("epoch,episodes,success_rate,mean_actor_loss,mean_critic_loss,epsilon\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:?},{:?},{:?},{:?}\n",
                r.epoch, r.episodes, r.success_rate, r.mean_actor_loss, r.mean_critic_loss, r.epsilon
            ));
        }
        out
    }

    pub fn success_curve(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.success_rate).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub epochs: usize,
    /// Stop after the first epoch whose eval success reaches this value.
    pub stop_at_success: Option<f64>,
    pub method: String,
}

impl RunOptions {
    pub fn new(epochs: usize, method: impl Into<String>) -> Self {
        RunOptions { epochs, stop_at_success: None, method: method.into() }
    }
}

pub struct TrainOutcome {
    pub agent: ActorCritic,
    pub log: TrainingLog,
    /// Mean wall-clock seconds per training episode (collection only), per epoch.
    pub episode_seconds: Vec<f64>,
    pub early_stopped: bool,
}

/// Goal-conditioned DDPG with final-state hindsight relabelling.
///
/// Each epoch collects `episodes_per_epoch` episodes spread over
/// `cycles_per_epoch` cycles, each cycle followed by `updates_per_cycle`
/// gradient steps, then evaluates the frozen policy.
pub fn train_goal_policy(
    env: &GoalTask,
    cfg: &TrainConfig,
    explorer: &mut dyn Exploration,
    seed: u64,
    opts: &RunOptions,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut env_rng = stream_rng(seed, streams::ENV);
    let mut noise_rng = stream_rng(seed, streams::NOISE);
    let mut replay_rng = stream_rng(seed, streams::REPLAY);
    let mut eval_rng = stream_rng(seed, streams::EVAL);
    let mut agent = ActorCritic::new(
        env.space.obs_dim(),
        env.space.goal_dim(),
        env.space.action_dim(),
        &cfg.agent_config(),
        &mut stream_rng(seed, streams::INIT),
    )?;
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let total_episodes = opts.epochs * cfg.episodes_per_epoch;
    let mut episodes_done = 0;
    let mut log = TrainingLog::default();
    let mut episode_seconds = Vec::new();
    let mut early_stopped = false;
    let started = Instant::now();

    for epoch in 0..opts.epochs {
        let (mut actor_loss, mut critic_loss, mut updates) = (0.0, 0.0, 0usize);
        let mut collect_time = 0.0;
        for cycle in 0..cfg.cycles_per_epoch {
            for _ in 0..cfg.episodes_in_cycle(cycle) {
                let t0 = Instant::now();
                explorer.begin_episode(cfg.epsilon_at(episodes_done, total_episodes));
                let (state, goal) = env.task.reset_with(&mut env_rng);
                let (episode, _) = run_episode(env, state, &goal, |ctx, _| explorer.act(ctx, &agent, &mut noise_rng))?;
                collect_time += t0.elapsed().as_secs_f64();
                let relabeled = her_relabel(&episode, env);
                agent.update_normalizers(&episode);
                agent.update_normalizers(&relabeled);
                buffer.extend(episode);
                buffer.extend(relabeled);
                episodes_done += 1;
            }
            if buffer.is_empty() {
                continue;
            }
            for _ in 0..cfg.updates_per_cycle {
                let batch = buffer.sample(cfg.batch_size, &mut replay_rng);
                let stats = agent.ddpg_update(&batch)?;
                actor_loss += stats.actor_loss;
                critic_loss += stats.critic_loss;
                updates += 1;
            }
        }
        let success_rate = evaluate(&agent, env, cfg.eval_episodes, &mut eval_rng)?;
        let denom = updates.max(1) as f64;
        log.rows.push(LogRow {
            epoch,
            episodes: episodes_done,
            success_rate,
            mean_actor_loss: actor_loss / denom,
            mean_critic_loss: critic_loss / denom,
            epsilon: explorer.epsilon(),
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
    Ok(TrainOutcome { agent, log, episode_seconds, early_stopped })
}

/// Trains one basic skill on its own environment in its abstracted space
/// with Gaussian exploration.
pub fn train_skill(task: &TaskSpec, cfg: &TrainConfig, seed: u64, opts: &RunOptions) -> Result<TrainOutcome> {
    if !task.id.is_skill() {
        return Err(Error::InvalidInput(format!("`{}` is not a skill environment", task.id)));
    }
    let env = GoalTask::new(task.clone(), Space::for_task(task.id));
    train_goal_policy(&env, cfg, &mut GaussianExploration::from_config(cfg), seed, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{TaskId, TaskSpec};

    #[test]
    fn epsilon_schedule_is_monotone() {
        let cfg = TrainConfig::default();
        let total = 100 * cfg.episodes_per_epoch;
        let eps: Vec<f64> = (0..total).map(|e| cfg.epsilon_at(e, total)).collect();
        assert_eq!(eps[0], 1.0);
        assert!(eps.windows(2).all(|w| w[1] <= w[0]));
        assert!((eps[total / 2] - 0.001).abs() < 1e-12);
        assert_eq!(*eps.last().unwrap(), eps[total / 2]);
    }

    #[test]
    fn episodes_spread_over_cycles() {
        let cfg = TrainConfig::default();
        let per_epoch: usize = (0..cfg.cycles_per_epoch).map(|c| cfg.episodes_in_cycle(c)).sum();
        assert_eq!(per_epoch, 16);
    }

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        let bad = TrainConfig { epsilon_end: 2.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 16,
            cycles_per_epoch: 4,
            updates_per_cycle: 3,
            episodes_per_epoch: 2,
            eval_episodes: 3,
            hidden: vec![8, 8],
            ..Default::default()
        }
    }

    #[test]
    fn log_schema_and_determinism() {
        let env = GoalTask::new(TaskSpec::with_defaults(TaskId::Reach), Space::Gripper);
        let cfg = tiny_cfg();
        let opts = RunOptions::new(3, "her");
        let run = |seed| {
            let mut ex = GaussianExploration::new(0.2);
            train_goal_policy(&env, &cfg, &mut ex, seed, &opts).unwrap()
        };
        let a = run(7);
        let b = run(7);
        assert_eq!(a.log.rows.len(), 3);
        assert_eq!(a.log.deterministic_csv(), b.log.deterministic_csv());
        assert_eq!(a.log.rows.last().unwrap().episodes, 6);
        let csv = a.log.to_csv_string();
        assert!(csv
            .starts_with("epoch,episodes,success_rate,mean_actor_loss,mean_critic_loss,epsilon,wall_clock_s,method\n"));
        let back = TrainingLog::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(back.deterministic_csv(), a.log.deterministic_csv());
        assert_ne!(run(8).log.deterministic_csv(), a.log.deterministic_csv());
    }
}
