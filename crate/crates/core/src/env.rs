//! Kinematic point-gripper world on the unit workspace cube.
//!
//! One movable object; grasping is attach/detach within `grasp_radius`.
//! Container walls are thin axis-aligned rectangles that block any motion
//! segment crossing them below their height.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Length of the task-space observation vector produced by [`TaskSpec::observe`].
pub const OBS_DIM: usize = 17;
pub const GOAL_DIM: usize = 3;
pub const ACTION_DIM: usize = 4;

/// Per-dimension range of observation vectors under the default step scale:
/// positions in the workspace box, flags in `[0, 1]`, gripper velocity within
/// one step per axis. A released object can drop the full workspace height in
/// one step, so its velocity range is the whole box over one step.
pub fn obs_bounds(params: &EnvParams) -> Vec<(f64, f64)> {
    let drop = 1.0 / params.step_scale;
    let mut b = vec![(0.0, 1.0); 6];
    b.extend([(-1.0, 1.0); 3]);
    b.extend([(0.0, 1.0); 2]);
    b.extend([(-1.0, 1.0); 3]);
    b.extend([(-drop, drop); 3]);
    b
}

/// Observation layout offsets.
pub mod obs {
    pub const GRIPPER_POS: usize = 0;
    pub const OBJECT_POS: usize = 3;
    pub const OBJECT_REL: usize = 6;
    pub const APERTURE: usize = 9;
    pub const ATTACHED: usize = 10;
    pub const GRIPPER_VEL: usize = 11;
    pub const OBJECT_VEL: usize = 14;
}

const WALL_CLEARANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvParams {
    pub step_scale: f64,
    pub grasp_radius: f64,
    pub tolerance: f64,
    pub put_inside_tolerance: f64,
    /// Max height of the object's bottom above the floor for put-inside success.
    pub put_inside_height_band: f64,
    /// Max gap between the bottom of object A and the top of object B for stack success.
    pub stack_contact_band: f64,
    pub object_half_size: f64,
    pub wall_height: f64,
    pub high_wall_height: f64,
    pub container_center: [f64; 2],
    pub container_half_width: f64,
    pub stack_base: [f64; 2],
    pub max_goal_height: f64,
    pub lift_heights: [f64; 2],
    pub max_episode_steps: usize,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            step_scale: 0.05,
            grasp_radius: 0.05,
            tolerance: 0.05,
            put_inside_tolerance: 0.08,
            put_inside_height_band: 0.033,
            stack_contact_band: 0.015,
            object_half_size: 0.025,
            wall_height: 0.1,
            high_wall_height: 1.0,
            container_center: [0.5, 0.5],
            container_half_width: 0.1,
            stack_base: [0.75, 0.25],
            max_goal_height: 0.45,
            lift_heights: [0.1, 0.25],
            max_episode_steps: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    Reach,
    Grasp,
    Transfer,
    PickAndMove,
    PutInside,
    Stack,
    TakeOut,
    PutInsideHighWall,
}

impl TaskId {
    pub const ALL: [TaskId; 8] = [
        TaskId::Reach,
        TaskId::Grasp,
        TaskId::Transfer,
        TaskId::PickAndMove,
        TaskId::PutInside,
        TaskId::Stack,
        TaskId::TakeOut,
        TaskId::PutInsideHighWall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::Reach => "reach",
            TaskId::Grasp => "grasp",
            TaskId::Transfer => "transfer",
            TaskId::PickAndMove => "pick_and_move",
            TaskId::PutInside => "put_inside",
            TaskId::Stack => "stack",
            TaskId::TakeOut => "take_out",
            TaskId::PutInsideHighWall => "put_inside_high_wall",
        }
    }

    pub fn is_skill(self) -> bool {
        matches!(self, TaskId::Reach | TaskId::Grasp | TaskId::Transfer)
    }

    fn has_container(self) -> bool {
        matches!(self, TaskId::PutInside | TaskId::PutInsideHighWall | TaskId::TakeOut)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        TaskId::ALL
            .into_iter()
            .find(|t| t.name() == s || (s == "transit" && *t == TaskId::Reach))
            .ok_or_else(|| Error::Config(format!("unknown task `{s}`")))
    }
}

/// Vertical wall in the plane `position[axis] == coord`, spanning `span` along
/// the other horizontal axis and `[0, height]` vertically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub axis: usize,
    pub coord: f64,
    pub span: (f64, f64),
    pub height: f64,
}

impl Wall {
    /// Parameter along `from → to` where the segment crosses this wall, if it does.
    fn crossing(&self, from: &Vec3, to: &Vec3) -> Option<f64> {
        let a = self.axis;
        let side_from = from[a] < self.coord;
        let side_to = to[a] < self.coord;
        if side_from == side_to {
            return None;
        }
        let lambda = (self.coord - from[a]) / (to[a] - from[a]);
        let other = 1 - a;
        let along = from[other] + lambda * (to[other] - from[other]);
        let z = from[2] + lambda * (to[2] - from[2]);
        (along >= self.span.0 && along <= self.span.1 && z <= self.height).then_some(lambda)
    }

    /// Whether `from` and `to` lie on opposite sides with the crossing below the top.
    pub fn separates(&self, from: &Vec3, to: &Vec3) -> bool {
        self.crossing(from, to).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Body {
    pub pos: Vec3,
    pub vel: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub gripper_pos: Vec3,
    pub gripper_vel: Vec3,
    /// 1 = open, 0 = closed.
    pub aperture: f64,
    pub object: Body,
    pub attached: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: WorldState,
    pub reward: f64,
    pub done: bool,
    pub achieved_goal: Vec3,
}

/// A task: its geometry, tolerance, and reward predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub params: EnvParams,
    pub tolerance: f64,
    pub walls: Vec<Wall>,
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl TaskSpec {
    pub fn new(id: TaskId, params: EnvParams) -> Self {
        let tolerance = match id {
            TaskId::PutInside | TaskId::PutInsideHighWall => params.put_inside_tolerance,
            _ => params.tolerance,
        };
        let mut walls = Vec::new();
        if id.has_container() {
            let [cx, cy] = params.container_center;
            let hw = params.container_half_width;
            let low = params.wall_height;
            let high_x = if id == TaskId::PutInsideHighWall { params.high_wall_height } else { low };
            walls.push(Wall { axis: 0, coord: cx - hw, span: (cy - hw, cy + hw), height: low });
            walls.push(Wall { axis: 0, coord: cx + hw, span: (cy - hw, cy + hw), height: high_x });
            walls.push(Wall { axis: 1, coord: cy - hw, span: (cx - hw, cx + hw), height: low });
            walls.push(Wall { axis: 1, coord: cy + hw, span: (cx - hw, cx + hw), height: low });
        }
        TaskSpec { id, params, tolerance, walls }
    }

    pub fn with_defaults(id: TaskId) -> Self {
        Self::new(id, EnvParams::default())
    }

    /// The environment a skill runs in when embedded in `world`: the skill's
    /// goal semantics and tolerance with the world's geometry.
    pub fn skill_in_world(skill: TaskId, world: &TaskSpec) -> Self {
        let mut spec = TaskSpec::new(skill, world.params.clone());
        spec.walls = world.walls.clone();
        spec
    }

    pub fn max_episode_steps(&self) -> usize {
        self.params.max_episode_steps
    }

    fn rest_height(&self) -> f64 {
        self.params.object_half_size
    }

    fn stack_top(&self) -> f64 {
        2.0 * self.params.object_half_size
    }

    fn support_height(&self, xy: [f64; 2]) -> f64 {
        let [bx, by] = self.params.stack_base;
        let h = self.params.object_half_size;
        if self.id == TaskId::Stack && (xy[0] - bx).abs() <= h && (xy[1] - by).abs() <= h {
            self.stack_top() + h
        } else {
            h
        }
    }

    fn clip_to_workspace(&self, p: Vec3) -> Vec3 {
        [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0), p[2].clamp(self.rest_height(), 1.0)]
    }

    /// Truncates the motion `from → to` so it crosses no wall below its height.
    pub fn blocked_motion(&self, from: &Vec3, mut to: Vec3) -> Vec3 {
        for _ in 0..8 {
            let hit = self.walls.iter().find(|w| w.crossing(from, &to).is_some());
            let Some(wall) = hit else { return to };
            let a = wall.axis;
            to[a] = if from[a] < wall.coord {
                from[a].max(wall.coord - WALL_CLEARANCE)
            } else {
                from[a].min(wall.coord + WALL_CLEARANCE)
            };
        }
        *from
    }

    pub fn achieved_goal(&self, state: &WorldState) -> Vec3 {
        match self.id {
            TaskId::Reach => state.gripper_pos,
            _ => state.object.pos,
        }
    }

    /// Goal projection of an observation vector (see [`obs`]).
    pub fn achieved_goal_from_obs(&self, o: &[f64]) -> Vec3 {
        let at = match self.id {
            TaskId::Reach => obs::GRIPPER_POS,
            _ => obs::OBJECT_POS,
        };
        [o[at], o[at + 1], o[at + 2]]
    }

    pub fn is_success(&self, achieved: &[f64], desired: &[f64]) -> bool {
        if distance(achieved, desired) > self.tolerance {
            return false;
        }
        match self.id {
            TaskId::PutInside | TaskId::PutInsideHighWall => {
                achieved[2] - self.rest_height() <= self.params.put_inside_height_band
            }
            TaskId::Stack => {
                let horizontal = distance(&achieved[..2], &desired[..2]);
                let bottom = achieved[2] - self.params.object_half_size;
                horizontal <= self.tolerance && (bottom - self.stack_top()).abs() <= self.params.stack_contact_band
            }
            _ => true,
        }
    }

    /// Sparse reward: 0 on success, −1 otherwise.
    pub fn reward(&self, achieved: &[f64], desired: &[f64]) -> Result<f64> {
        if achieved.len() != desired.len() || achieved.len() != GOAL_DIM {
            return Err(Error::dims("goal", GOAL_DIM, achieved.len().max(desired.len())));
        }
        Ok(if self.is_success(achieved, desired) { 0.0 } else { -1.0 })
    }

    pub fn reset(&self, seed: u64) -> (WorldState, Vec3) {
        self.reset_with(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn reset_with<R: Rng + ?Sized>(&self, rng: &mut R) -> (WorldState, Vec3) {
        let p = &self.params;
        let h = self.rest_height();
        let floor = |rng: &mut R| -> Vec3 { [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95), h] };
        let air = |rng: &mut R, z_lo: f64| -> Vec3 {
            [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95), rng.random_range(z_lo..p.max_goal_height)]
        };
        let [cx, cy] = p.container_center;
        let hw = p.container_half_width;
        let outside_container = |q: &Vec3| (q[0] - cx).abs() > hw + 0.05 || (q[1] - cy).abs() > hw + 0.05;
        let far_goal = |rng: &mut R, from: Vec3, z_lo: f64, outside: bool| loop {
            let g = air(rng, z_lo);
            if distance(&g, &from) > self.tolerance && (!outside || outside_container(&g)) {
                break g;
            }
        };

        let mut state = WorldState {
            gripper_pos: [0.5, 0.5, 0.3],
            gripper_vel: [0.0; 3],
            aperture: 1.0,
            object: Body::default(),
            attached: false,
            steps: 0,
        };
        let goal = match self.id {
            TaskId::Reach => {
                state.gripper_pos = air(rng, h);
                state.object.pos = floor(rng);
                far_goal(rng, state.gripper_pos, h, false)
            }
            TaskId::Grasp => {
                state.object.pos = floor(rng);
                state.gripper_pos = state.object.pos;
                let lift = rng.random_range(p.lift_heights[0]..p.lift_heights[1]);
                let o = state.object.pos;
                [o[0], o[1], o[2] + lift]
            }
            TaskId::Transfer => {
                state.gripper_pos = air(rng, h);
                state.object.pos = state.gripper_pos;
                state.attached = true;
                state.aperture = 0.0;
                far_goal(rng, state.gripper_pos, h, false)
            }
            TaskId::PickAndMove => {
                state.gripper_pos = air(rng, h);
                state.object.pos = floor(rng);
                far_goal(rng, state.object.pos, h, false)
            }
            TaskId::PutInside | TaskId::PutInsideHighWall => {
                state.gripper_pos = air(rng, 0.15);
                state.object.pos = loop {
                    let q = floor(rng);
                    if outside_container(&q) {
                        break q;
                    }
                };
                [cx, cy, h]
            }
            TaskId::Stack => {
                let [bx, by] = p.stack_base;
                state.gripper_pos = air(rng, h);
                state.object.pos = loop {
                    let q = floor(rng);
                    if distance(&q[..2], &[bx, by]) > 0.1 {
                        break q;
                    }
                };
                [bx, by, self.stack_top() + h]
            }
            TaskId::TakeOut => {
                let inner = hw - 0.05;
                state.object.pos = [cx + rng.random_range(-inner..inner), cy + rng.random_range(-inner..inner), h];
                state.gripper_pos = state.object.pos;
                state.attached = true;
                state.aperture = 0.0;
                far_goal(rng, state.object.pos, h, true)
            }
        };
        (state, goal)
    }

    pub fn step(&self, state: &WorldState, goal: &[f64], action: &[f64]) -> Result<StepResult> {
        if action.len() != ACTION_DIM {
            return Err(Error::InvalidAction(format!("expected {ACTION_DIM} components, got {}", action.len())));
        }
        if let Some(bad) = action.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidAction(format!("non-finite component {bad}")));
        }
        let a: Vec<f64> = action.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        let mut next = state.clone();
        next.steps += 1;

        let grip = a[3];
        if grip < 0.0 {
            next.aperture = 0.0;
            if !next.attached && distance(&next.gripper_pos, &next.object.pos) <= self.params.grasp_radius {
                next.attached = true;
                next.object.pos = next.gripper_pos;
            }
        } else if grip > 0.0 {
            next.aperture = 1.0;
            if next.attached {
                next.attached = false;
                let o = next.object.pos;
                next.object.pos[2] = self.support_height([o[0], o[1]]);
            }
        }

        let s = self.params.step_scale;
        let from = next.gripper_pos;
        let target = self.clip_to_workspace([from[0] + s * a[0], from[1] + s * a[1], from[2] + s * a[2]]);
        next.gripper_pos = self.blocked_motion(&from, target);
        if next.attached {
            next.object.pos = next.gripper_pos;
        }
        next.gripper_vel = sub(&next.gripper_pos, &state.gripper_pos);
        next.object.vel = sub(&next.object.pos, &state.object.pos);

        let achieved_goal = self.achieved_goal(&next);
        let reward = self.reward(&achieved_goal, goal)?;
        let done = reward == 0.0 || next.steps >= self.params.max_episode_steps;
        Ok(StepResult { next_state: next, reward, done, achieved_goal })
    }

    /// Task-space observation vector; velocities are scaled by `1/step_scale`.
    pub fn observe(&self, s: &WorldState) -> Vec<f64> {
        let inv = 1.0 / self.params.step_scale;
        let mut o = Vec::with_capacity(OBS_DIM);
        o.extend_from_slice(&s.gripper_pos);
        o.extend_from_slice(&s.object.pos);
        o.extend_from_slice(&sub(&s.object.pos, &s.gripper_pos));
        o.push(s.aperture);
        o.push(if s.attached { 1.0 } else { 0.0 });
        o.extend(s.gripper_vel.iter().map(|v| v * inv));
        o.extend(s.object.vel.iter().map(|v| v * inv));
        o
    }

    /// Checks the world-state invariants.
    pub fn validate(&self, s: &WorldState) -> Result<()> {
        let inside = |p: &Vec3| p.iter().all(|v| (0.0..=1.0).contains(v));
        if !inside(&s.gripper_pos) || !inside(&s.object.pos) {
            return Err(Error::InvalidInput("position outside the workspace".into()));
        }
        if !(0.0..=1.0).contains(&s.aperture) {
            return Err(Error::InvalidInput("aperture outside [0, 1]".into()));
        }
        if s.attached && distance(&s.gripper_pos, &s.object.pos) > self.params.grasp_radius {
            return Err(Error::InvalidInput("attached object out of grasp radius".into()));
        }
        Ok(())
    }
}
