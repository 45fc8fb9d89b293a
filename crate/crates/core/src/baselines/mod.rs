//! Comparison methods: plain HER with Gaussian exploration and the
//! parameterized-action-space (PAS) meta-controller over skills.

mod pas;

pub use pas::{pas_train, run_pas_episode, MacroTransition, PasAction, PasAgent, PasConfig, PasOutcome};

use crate::env::TaskSpec;
use crate::error::Result;
use crate::rl::{train_goal_policy, GaussianExploration, GoalTask, RunOptions, Space, TrainConfig, TrainOutcome};

/// HER on the full task in task space, exploring with Gaussian action noise
/// only. The log's ε column is always 0.
pub fn her_baseline_train(task: &TaskSpec, cfg: &TrainConfig, seed: u64, opts: &RunOptions) -> Result<TrainOutcome> {
    let env = GoalTask::new(task.clone(), Space::Task);
    train_goal_policy(&env, cfg, &mut GaussianExploration::from_config(cfg), seed, opts)
}
