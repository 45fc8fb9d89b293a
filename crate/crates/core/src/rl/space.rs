use serde::{Deserialize, Serialize};

use crate::env::{obs, TaskId, TaskSpec, Vec3, WorldState, ACTION_DIM, GOAL_DIM, OBS_DIM};

/// State/action abstraction an agent operates in.
///
/// `Task` sees the full task observation and emits 4-dim actions. `Gripper`
/// sees only the gripper position and emits `(dx, dy, dz)`; the gripper
/// command is padded with 0 (no change). `Carry` sees the full observation
/// but only moves; the gripper command is held closed (−1), so whatever is
/// grasped stays grasped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Task,
    Gripper,
    Carry,
}

impl Space {
    /// The abstraction each basic skill is trained in: reach only moves the
    /// gripper, grasp controls everything, transfer moves with the gripper
    /// held shut. Task policies always use [`Space::Task`].
    pub fn for_task(id: TaskId) -> Space {
        match id {
            TaskId::Reach => Space::Gripper,
            TaskId::Transfer => Space::Carry,
            _ => Space::Task,
        }
    }

    pub fn obs_dim(self) -> usize {
        match self {
            Space::Task | Space::Carry => OBS_DIM,
            Space::Gripper => 3,
        }
    }

    pub fn action_dim(self) -> usize {
        match self {
            Space::Task => ACTION_DIM,
            Space::Gripper | Space::Carry => 3,
        }
    }

    pub fn goal_dim(self) -> usize {
        GOAL_DIM
    }

    pub fn project(self, task_obs: &[f64]) -> Vec<f64> {
        match self {
            Space::Task | Space::Carry => task_obs.to_vec(),
            Space::Gripper => task_obs[obs::GRIPPER_POS..obs::GRIPPER_POS + 3].to_vec(),
        }
    }

    pub fn embed_action(self, action: &[f64]) -> [f64; ACTION_DIM] {
        match self {
            Space::Task => [action[0], action[1], action[2], action[3]],
            Space::Gripper => [action[0], action[1], action[2], 0.0],
            Space::Carry => [action[0], action[1], action[2], -1.0],
        }
    }

    /// Goal achieved in an agent-space observation.
    pub fn achieved_goal(self, agent_obs: &[f64], task: &TaskSpec) -> Vec3 {
        match self {
            Space::Task | Space::Carry => task.achieved_goal_from_obs(agent_obs),
            Space::Gripper => [agent_obs[0], agent_obs[1], agent_obs[2]],
        }
    }
}

/// A task together with the space the learning agent acts in.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalTask {
    pub task: TaskSpec,
    pub space: Space,
}

impl GoalTask {
    pub fn new(task: TaskSpec, space: Space) -> Self {
        GoalTask { task, space }
    }

    pub fn observe(&self, state: &WorldState) -> Vec<f64> {
        self.space.project(&self.task.observe(state))
    }

    pub fn achieved_goal(&self, agent_obs: &[f64]) -> Vec3 {
        self.space.achieved_goal(agent_obs, &self.task)
    }
}
