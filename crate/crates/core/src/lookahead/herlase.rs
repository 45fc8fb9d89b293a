use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::search::{tree_search, Candidate, PlanningGoal, SearchConfig};
use crate::env::{TaskId, TaskSpec, Vec3};
use crate::error::{Error, Result};
use crate::rl::{
    stream_rng, streams, train_goal_policy, ActorCritic, Exploration, GaussianExploration, GoalTask, RunOptions, Space,
    StepContext, TrainConfig, TrainOutcome,
};
use crate::skills::SkillBundle;

/// The skill currently driving exploration.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillExecutionState {
    /// Index into the bundle list.
    pub skill: usize,
    pub subgoal: Vec3,
    pub steps_in_skill: usize,
    pub terminated: bool,
}

/// True once the sub-goal is achieved within the skill's tolerance, the
/// skill has run `max_skill_steps` steps, or the task goal is achieved.
pub fn check_skill_termination(
    exec: &SkillExecutionState,
    bundle: &SkillBundle,
    task_obs: &[f64],
    task: &TaskSpec,
    goal: &[f64],
) -> bool {
    exec.steps_in_skill >= bundle.max_skill_steps
        || bundle.policy.subgoal_reached(task_obs, &exec.subgoal)
        || task.is_success(&task.achieved_goal_from_obs(task_obs), goal)
}

/// One entry of the exploration trace: what happened at a primitive step.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    /// A new episode started.
    Episode,
    /// Tree search ran at a decision point and chose this candidate (or nothing).
    Plan { step: usize, chosen: Option<Candidate> },
    /// The active skill produced the action.
    SkillStep { step: usize, skill: usize },
    /// The noisy task policy produced the action.
    PolicyStep { step: usize },
}

/// Algorithm 1's behaviour policy: at decision points, with probability ε,
/// plan with the look-ahead tree and hand control to the chosen skill until
/// it terminates; otherwise act with the noisy task policy.
pub struct LookaheadExploration<'a> {
    pub bundles: &'a [SkillBundle],
    pub search: SearchConfig,
    gaussian: GaussianExploration,
    epsilon: f64,
    rng: ChaCha8Rng,
    active: Option<SkillExecutionState>,
    step: usize,
    trace: Option<Vec<TraceEvent>>,
}

impl<'a> LookaheadExploration<'a> {
    pub fn new(bundles: &'a [SkillBundle], search: SearchConfig, cfg: &TrainConfig, rng: ChaCha8Rng) -> Self {
        LookaheadExploration {
            bundles,
            search,
            gaussian: GaussianExploration::from_config(cfg),
            epsilon: cfg.epsilon_start,
            rng,
            active: None,
            step: 0,
            trace: None,
        }
    }

    /// Records every decision from now on.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    fn record(&mut self, event: TraceEvent) {
        if let Some(t) = &mut self.trace {
            t.push(event);
        }
    }
}

impl Exploration for LookaheadExploration<'_> {
    fn begin_episode(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
        self.active = None;
        self.step = 0;
        self.record(TraceEvent::Episode);
    }

    fn act(&mut self, ctx: &StepContext<'_>, agent: &ActorCritic, noise: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let step = self.step;
        self.step += 1;
        if let Some(exec) = &mut self.active {
            let bundle = &self.bundles[exec.skill];
            if check_skill_termination(exec, bundle, ctx.task_obs, ctx.task, ctx.goal) {
                exec.terminated = true;
                self.active = None;
            }
        }
        if self.active.is_none() && self.epsilon > 0.0 && self.rng.random::<f64>() < self.epsilon {
            let target = PlanningGoal { task: ctx.task, goal: ctx.goal };
            let plan = tree_search(ctx.task_obs, target, self.bundles, &self.search, &mut self.rng, None)?;
            let chosen = plan.map(|p| p.first());
            self.record(TraceEvent::Plan { step, chosen });
            self.active = chosen.map(|c| SkillExecutionState {
                skill: c.skill,
                subgoal: c.subgoal,
                steps_in_skill: 0,
                terminated: false,
            });
        }
        match &mut self.active {
            Some(exec) => {
                exec.steps_in_skill += 1;
                let skill = exec.skill;
                let action = self.bundles[skill].policy.act(ctx.task_obs, &exec.subgoal)?;
                self.record(TraceEvent::SkillStep { step, skill });
                Ok(action.to_vec())
            }
            None => {
                self.record(TraceEvent::PolicyStep { step });
                self.gaussian.act(ctx, agent, noise)
            }
        }
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// HER with look-ahead search exploration on `task`.
pub fn herlase_train(
    task: &TaskSpec,
    bundles: &[SkillBundle],
    cfg: &TrainConfig,
    search: &SearchConfig,
    seed: u64,
    opts: &RunOptions,
) -> Result<TrainOutcome> {
    if bundles.is_empty() {
        return Err(Error::InvalidInput("HERLASE needs at least one skill bundle".into()));
    }
    search.validate()?;
    let mut explorer = LookaheadExploration::new(bundles, search.clone(), cfg, stream_rng(seed, streams::EXPLORER));
    train_goal_policy(&GoalTask::new(task.clone(), Space::Task), cfg, &mut explorer, seed, opts)
}

/// Bundles restricted to the skills named in `skills`, in that order.
pub fn select_bundles(all: &[SkillBundle], skills: &[TaskId]) -> Result<Vec<SkillBundle>> {
    skills
        .iter()
        .map(|id| {
            all.iter()
                .find(|b| b.id() == *id)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("no bundle for skill `{id}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::synthetic_bundle;

    fn exec(steps: usize, subgoal: Vec3) -> SkillExecutionState {
        SkillExecutionState { skill: 0, subgoal, steps_in_skill: steps, terminated: false }
    }

    #[test]
    fn skill_termination_conditions() {
        let task = TaskSpec::with_defaults(TaskId::PickAndMove);
        let bundle = synthetic_bundle(TaskId::Reach, 1);
        let (state, _) = task.reset(3);
        let obs = task.observe(&state);
        let far_goal = [0.99, 0.99, 0.4];
        let gripper = state.gripper_pos;
        let far_sub = [1.0 - gripper[0], 1.0 - gripper[1], 0.45];
        assert!(!check_skill_termination(&exec(3, far_sub), &bundle, &obs, &task, &far_goal));
        // Step budget.
        assert!(check_skill_termination(&exec(bundle.max_skill_steps, far_sub), &bundle, &obs, &task, &far_goal));
        // Sub-goal reached: reach's sub-goal is the gripper position.
        assert!(check_skill_termination(&exec(0, gripper), &bundle, &obs, &task, &far_goal));
        // Task goal reached: the goal is the object's current position.
        assert!(check_skill_termination(&exec(0, far_sub), &bundle, &obs, &task, &state.object.pos));
    }

    #[test]
    fn select_bundles_keeps_requested_order() {
        let all = crate::testing::synthetic_bundles(0);
        let picked = select_bundles(&all, &[TaskId::Transfer, TaskId::Reach]).unwrap();
        assert_eq!(picked.iter().map(SkillBundle::id).collect::<Vec<_>>(), vec![TaskId::Transfer, TaskId::Reach]);
        assert!(select_bundles(&all[..1], &[TaskId::Grasp]).is_err());
    }
}
