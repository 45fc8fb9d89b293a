use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::env::{TaskId, TaskSpec, Vec3, WorldState, ACTION_DIM, GOAL_DIM};
use crate::error::{Error, Result};
use crate::nn::Checkpoint;
use crate::rl::{ActorCritic, AgentConfig, Space};

/// A trained skill policy together with the adapters between its own
/// abstracted space and the task space.
#[derive(Debug, Clone)]
pub struct SkillPolicy {
    pub id: TaskId,
    pub space: Space,
    pub agent: ActorCritic,
    pub tolerance: f64,
}

/// Small human-readable file stored next to a skill checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillMetadata {
    pub task: String,
    pub space: Space,
    pub state_dim: usize,
    pub goal_dim: usize,
    pub action_dim: usize,
    pub tolerance: f64,
    #[serde(default)]
    pub final_success: Option<f64>,
    #[serde(default)]
    pub config_hash: Option<String>,
}

pub fn policy_path(dir: &Path, id: TaskId) -> PathBuf {
    dir.join(format!("{id}.policy.ckpt"))
}

pub fn metadata_path(dir: &Path, id: TaskId) -> PathBuf {
    dir.join(format!("{id}.meta.toml"))
}

impl SkillPolicy {
    pub fn new(id: TaskId, agent: ActorCritic, tolerance: f64) -> Result<Self> {
        let space = Space::for_task(id);
        if agent.state_dim() != space.obs_dim() || agent.action_dim() != space.action_dim() {
            return Err(Error::InvalidInput(format!(
                "agent dims ({}, {}) do not match the {id} skill space",
                agent.state_dim(),
                agent.action_dim()
            )));
        }
        Ok(SkillPolicy { id, space, agent, tolerance })
    }

    /// Primitive task-space action `π^i(s, g_i)` through the space adapters.
    pub fn act(&self, task_obs: &[f64], subgoal: &[f64]) -> Result<[f64; ACTION_DIM]> {
        let a = self.agent.act(&self.space.project(task_obs), subgoal)?;
        Ok(self.space.embed_action(&a))
    }

    /// `Q^i(s, g_i, π^i(s, g_i))` read from the skill's own critic.
    pub fn value(&self, task_obs: &[f64], subgoal: &[f64]) -> Result<f64> {
        self.agent.value(&self.space.project(task_obs), subgoal)
    }

    /// Batched [`SkillPolicy::value`] over rows of task observations.
    pub fn value_batch(&self, task_obs: &[Vec<f64>], subgoals: &[Vec3]) -> Result<Array1<f64>> {
        let sdim = self.space.obs_dim();
        let mut x = Array2::zeros((task_obs.len(), sdim + GOAL_DIM));
        for (i, (o, g)) in task_obs.iter().zip(subgoals).enumerate() {
            let p = self.space.project(o);
            for (j, v) in p.iter().chain(g.iter()).enumerate() {
                x[[i, j]] = *v;
            }
        }
        self.agent.value_batch(x.view())
    }

    /// Point of the world this skill controls (gripper for reach, object otherwise).
    pub fn achieved(&self, task_obs: &[f64]) -> Vec3 {
        TaskSpec::with_defaults(self.id).achieved_goal_from_obs(task_obs)
    }

    pub fn subgoal_reached(&self, task_obs: &[f64], subgoal: &[f64]) -> bool {
        crate::env::distance(&self.achieved(task_obs), subgoal) <= self.tolerance
    }

    pub fn metadata(&self) -> SkillMetadata {
        SkillMetadata {
            task: self.id.to_string(),
            space: self.space,
            state_dim: self.space.obs_dim(),
            goal_dim: GOAL_DIM,
            action_dim: self.space.action_dim(),
            tolerance: self.tolerance,
            final_success: None,
            config_hash: None,
        }
    }

    pub fn save(&self, dir: &Path, meta: &SkillMetadata) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.agent.to_checkpoint("").save(&policy_path(dir, self.id))?;
        let text = toml::to_string(meta).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(metadata_path(dir, self.id), text)?;
        Ok(())
    }

    pub fn load(dir: &Path, id: TaskId, cfg: &AgentConfig) -> Result<(Self, SkillMetadata)> {
        let meta_path = metadata_path(dir, id);
        if !meta_path.exists() {
            return Err(Error::MissingArtifact(meta_path));
        }
        let meta: SkillMetadata =
            toml::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| Error::Config(e.to_string()))?;
        let ckpt = Checkpoint::load(&policy_path(dir, id))?;
        let agent = ActorCritic::read_from(&ckpt, "", cfg)?;
        Ok((SkillPolicy::new(id, agent, meta.tolerance)?, meta))
    }
}

/// Outcome of running a skill from one start state.
#[derive(Debug, Clone)]
pub struct SkillRollout {
    pub final_state: WorldState,
    pub steps: usize,
    pub success: bool,
}

/// Executes `skill` towards `subgoal` inside `world` (the skill's own goal
/// semantics with the world's geometry) until the sub-goal is reached or
/// `max_steps` primitive steps have run.
pub fn run_skill(
    skill: &SkillPolicy,
    world: &TaskSpec,
    start: &WorldState,
    subgoal: &Vec3,
    max_steps: usize,
) -> Result<SkillRollout> {
    let mut state = start.clone();
    let mut obs = world.observe(&state);
    if skill.subgoal_reached(&obs, subgoal) {
        return Ok(SkillRollout { final_state: state, steps: 0, success: true });
    }
    for step in 1..=max_steps {
        let action = skill.act(&obs, subgoal)?;
        state = world.step(&state, subgoal, &action)?.next_state;
        obs = world.observe(&state);
        if skill.subgoal_reached(&obs, subgoal) {
            return Ok(SkillRollout { final_state: state, steps: step, success: true });
        }
    }
    Ok(SkillRollout { final_state: state, steps: max_steps, success: false })
}
