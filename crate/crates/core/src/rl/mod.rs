//! Goal-conditioned DDPG with hindsight experience replay.

mod agent;
mod her;
mod normalizer;
mod replay;
mod space;
mod train;

pub use agent::{ActorCritic, AgentConfig, UpdateStats};
pub use her::her_relabel;
pub use normalizer::Normalizer;
pub use replay::{ReplayBuffer, Transition};
pub use space::{GoalTask, Space};
pub use train::{
    evaluate, run_episode, stream_rng, streams, train_goal_policy, train_skill, Exploration, GaussianExploration,
    LogRow, RunOptions, StepContext, TrainConfig, TrainOutcome, TrainingLog,
};
