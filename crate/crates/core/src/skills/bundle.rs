use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{collect_skill_data, CollectConfig, SkillDataset};
use super::models::{
    train_dynamics, train_success, DynamicsModel, DynamicsReport, ModelConfig, SuccessModel, SuccessReport,
};
use super::policy::SkillPolicy;
use super::sampler::SubgoalSampler;
use crate::env::{obs, obs_bounds, TaskId, TaskSpec, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::Checkpoint;
use crate::rl::{stream_rng, AgentConfig};

/// `Ω^i = (π^i, Q^i, u^i, T^i_coarse)`: everything the planner needs about one skill.
#[derive(Debug, Clone)]
pub struct SkillBundle {
    pub policy: SkillPolicy,
    pub success: SuccessModel,
    pub dynamics: DynamicsModel,
    pub max_skill_steps: usize,
}

impl SkillBundle {
    pub fn id(&self) -> TaskId {
        self.policy.id
    }
}

/// The world whose geometry a task's planning models are fitted in. Tasks
/// with a container share the put-inside models; the rest use pick-and-move.
/// The high-wall variant deliberately gets models fitted without its wall.
pub fn model_world(task: TaskId) -> TaskId {
    match task {
        TaskId::PutInside | TaskId::PutInsideHighWall | TaskId::TakeOut => TaskId::PutInside,
        _ => TaskId::PickAndMove,
    }
}

pub fn models_path(dir: &Path, skill: TaskId, world: TaskId) -> PathBuf {
    dir.join(format!("{skill}.{world}.models.ckpt"))
}

/// CSV of one of the two execution datasets; `kind` is `dynamics` or `success`.
pub fn dataset_path(dir: &Path, skill: TaskId, world: TaskId, kind: &str) -> PathBuf {
    dir.join(format!("{skill}.{world}.{kind}.csv"))
}

/// Quality numbers written next to the fitted models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub dynamics_rows: usize,
    pub success_rows: usize,
    pub skill_success_rate: f64,
    pub dynamics: DynamicsReport,
    pub success: SuccessReport,
}

/// Execution datasets for one skill: the dynamics data starts from the
/// skill's own environment, the success data mixes those starts with the
/// downstream task's start distribution.
#[derive(Debug, Clone)]
pub struct SkillData {
    pub dynamics: SkillDataset,
    pub success: SkillDataset,
}

/// Collects execution data for `policy` in `world` and fits both models.
pub fn fit_skill_models(
    policy: &SkillPolicy,
    world: &TaskSpec,
    sampler: &SubgoalSampler,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(SuccessModel, DynamicsModel, FitReport, SkillData)> {
    let collect = |task_start_fraction, stream| {
        let c = CollectConfig { episodes: cfg.episodes, task_start_fraction, max_skill_steps: cfg.max_skill_steps };
        collect_skill_data(policy, world, sampler, &c, stream_rng_seed(seed, stream))
    };
    let data = SkillData { dynamics: collect(0.0, 0)?, success: collect(cfg.task_start_fraction, 1)? };
    let (dynamics, dyn_report) = train_dynamics(&data.dynamics, cfg, obs_bounds(&world.params), position_dims(), seed)?;
    let (success, succ_report) = train_success(&data.success, cfg, seed)?;
    let report = FitReport {
        dynamics_rows: data.dynamics.len(),
        success_rows: data.success.len(),
        skill_success_rate: data.dynamics.success_rate(),
        dynamics: dyn_report,
        success: succ_report,
    };
    Ok((success, dynamics, report, data))
}

fn stream_rng_seed(seed: u64, stream: u64) -> u64 {
    rand::Rng::random(&mut stream_rng(seed, 50 + stream))
}

/// Gripper and object position coordinates of a task observation; the
/// dynamics error is measured on these.
pub fn position_dims() -> std::ops::Range<usize> {
    obs::GRIPPER_POS..obs::OBJECT_POS + 3
}

pub fn save_models(
    dir: &Path,
    skill: TaskId,
    world: TaskId,
    success: &SuccessModel,
    dynamics: &DynamicsModel,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut ckpt = Checkpoint::new();
    success.write_into(&mut ckpt, "success");
    dynamics.write_into(&mut ckpt, "dynamics");
    ckpt.save(&models_path(dir, skill, world))
}

pub fn load_models(dir: &Path, skill: TaskId, world: TaskId) -> Result<(SuccessModel, DynamicsModel)> {
    let ckpt = Checkpoint::load(&models_path(dir, skill, world))?;
    let success = SuccessModel::read_from(&ckpt, "success")?;
    let dynamics = DynamicsModel::read_from(&ckpt, "dynamics")?;
    if dynamics.state_dim != OBS_DIM {
        return Err(Error::CorruptCheckpoint("dynamics model is not in task space".into()));
    }
    Ok((success, dynamics))
}

/// Loads the bundles for `skills` as fitted for `task`'s planning world.
/// Any missing file is reported before training starts.
pub fn load_bundles(
    dir: &Path,
    skills: &[TaskId],
    task: TaskId,
    agent_cfg: &AgentConfig,
    max_skill_steps: usize,
) -> Result<Vec<SkillBundle>> {
    let world = model_world(task);
    skills
        .iter()
        .map(|&id| {
            let (policy, _) = SkillPolicy::load(dir, id, agent_cfg)?;
            let (success, dynamics) = load_models(dir, id, world)?;
            Ok(SkillBundle { policy, success, dynamics, max_skill_steps })
        })
        .collect()
}

/// Seed used for a skill's model fitting within one experiment.
pub fn model_seed(seed: u64, skill: TaskId, world: TaskId) -> u64 {
    let mut rng = stream_rng(seed, 100 + skill as u64 * 10 + world as u64);
    rand::Rng::random(&mut rng)
}
