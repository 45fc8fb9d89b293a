use super::replay::Transition;
use super::space::GoalTask;

/// Hindsight copies of an episode with the goal replaced by the goal achieved
/// in the final state (`g' = achieved(s_T)`), rewards recomputed.
pub fn her_relabel(episode: &[Transition], env: &GoalTask) -> Vec<Transition> {
    let Some(last) = episode.last() else {
        return Vec::new();
    };
    let new_goal = env.achieved_goal(&last.next_state);
    episode
        .iter()
        .map(|t| {
            let achieved = env.achieved_goal(&t.next_state);
            let success = env.task.is_success(&achieved, &new_goal);
            Transition { goal: new_goal.to_vec(), reward: if success { 0.0 } else { -1.0 }, done: success, ..t.clone() }
        })
        .collect()
}
