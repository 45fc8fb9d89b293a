use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{obs, EnvParams, TaskId, Vec3};

/// Per-skill sub-goal distributions used by the planner and by model-data
/// collection.
///
/// * reach: with probability `reach_object_prob` the current object
///   position, otherwise uniform over the workspace box.
/// * grasp: the object's position lifted by a height from `lift_heights`.
/// * transfer: the task goal, a point hovering above it (heights from
///   `hover_heights`), or a uniform point, with the given probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubgoalSampler {
    pub reach_object_prob: f64,
    pub lift_heights: [f64; 2],
    pub transfer_goal_prob: f64,
    pub transfer_hover_prob: f64,
    pub hover_heights: [f64; 2],
    /// Lowest sampled z (object resting height) and highest.
    pub z_range: [f64; 2],
    pub xy_range: [f64; 2],
}

impl Default for SubgoalSampler {
    fn default() -> Self {
        let env = EnvParams::default();
        SubgoalSampler {
            reach_object_prob: 0.5,
            lift_heights: env.lift_heights,
            transfer_goal_prob: 1.0 / 3.0,
            transfer_hover_prob: 1.0 / 3.0,
            hover_heights: [0.15, 0.35],
            z_range: [env.object_half_size, env.max_goal_height],
            xy_range: [0.05, 0.95],
        }
    }
}

impl SubgoalSampler {
    pub fn uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let [lo, hi] = self.xy_range;
        [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(self.z_range[0]..self.z_range[1])]
    }

    /// Draws a sub-goal for `skill` given the current task observation and
    /// the task goal.
    pub fn sample<R: Rng + ?Sized>(&self, skill: TaskId, task_obs: &[f64], task_goal: &[f64], rng: &mut R) -> Vec3 {
        let object = [task_obs[obs::OBJECT_POS], task_obs[obs::OBJECT_POS + 1], task_obs[obs::OBJECT_POS + 2]];
        match skill {
            TaskId::Reach => {
                if rng.random::<f64>() < self.reach_object_prob {
                    object
                } else {
                    self.uniform(rng)
                }
            }
            TaskId::Grasp => {
                let lift = rng.random_range(self.lift_heights[0]..self.lift_heights[1]);
                [object[0], object[1], (object[2] + lift).min(1.0)]
            }
            _ => {
                let u = rng.random::<f64>();
                if u < self.transfer_goal_prob {
                    [task_goal[0], task_goal[1], task_goal[2]]
                } else if u < self.transfer_goal_prob + self.transfer_hover_prob {
                    let z = rng.random_range(self.hover_heights[0]..self.hover_heights[1]);
                    [task_goal[0], task_goal[1], z]
                } else {
                    self.uniform(rng)
                }
            }
        }
    }
}
