//! Look-ahead tree search over skills and the HERLASE training loop that
//! explores with it.

mod herlase;
mod search;

pub use herlase::{
    check_skill_termination, herlase_train, select_bundles, LookaheadExploration, SkillExecutionState, TraceEvent,
};
pub use search::{
    path_to, sample_candidates, score_path, tree_search, Candidate, PathResult, PlanningGoal, SearchConfig,
    SearchTrace, TraceRow, TreeNode,
};
