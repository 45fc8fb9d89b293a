use std::io::Write;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{distance, TaskId, TaskSpec, Vec3, GOAL_DIM};
use crate::error::{Error, Result};
use crate::skills::{SkillBundle, SubgoalSampler};

/// Tree-search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Candidates sampled per expanded node (B).
    pub branching: usize,
    /// Maximum plan length in skill executions (H).
    pub height: usize,
    /// Candidates with predicted success `u ≤ prune_threshold` are discarded.
    pub prune_threshold: f64,
    /// Weight on `r_final` in the path score `R = Σ Q + w · r_final`.
    pub final_distance_weight: f64,
    pub sampler: SubgoalSampler,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            branching: 5,
            height: 3,
            prune_threshold: 0.5,
            final_distance_weight: 100.0,
            sampler: SubgoalSampler::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.branching == 0 || self.height == 0 {
            return Err(Error::Config("branching factor and height must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.prune_threshold) {
            return Err(Error::Config("prune_threshold must lie in [0, 1]".into()));
        }
        if self.final_distance_weight.is_nan() || self.final_distance_weight < 0.0 {
            return Err(Error::Config("final_distance_weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// A sampled (skill, sub-goal) pair; `skill` indexes the bundle list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub skill: usize,
    pub subgoal: Vec3,
}

/// Draws `b` candidates: skills uniformly with replacement, sub-goals from
/// the per-skill sampler conditioned on `state`.
pub fn sample_candidates(
    skills: &[TaskId],
    b: usize,
    sampler: &SubgoalSampler,
    state: &[f64],
    goal: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<Candidate> {
    (0..b)
        .map(|_| {
            let skill = rng.random_range(0..skills.len());
            Candidate { skill, subgoal: sampler.sample(skills[skill], state, goal, rng) }
        })
        .collect()
}

/// A node of the look-ahead tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub predicted_state: Vec<f64>,
    /// `Q^i(s_parent, g_i)` of the edge into this node; 0 at the root.
    pub transition_reward: f64,
    pub depth: usize,
    pub parent: Option<usize>,
    pub candidate: Option<Candidate>,
}

/// The best plan found by [`tree_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// (bundle index, sub-goal) per hop, first hop first.
    pub steps: Vec<Candidate>,
    pub total_score: f64,
    pub r_final: f64,
}

impl PathResult {
    pub fn first(&self) -> Candidate {
        self.steps[0]
    }
}

/// `R = Σ Q + w · r_final` with `r_final = −‖leaf − g‖₂`.
pub fn score_path(edge_q: &[f64], leaf_achieved: &[f64], goal: &[f64], final_weight: f64) -> f64 {
    edge_q.iter().sum::<f64>() - final_weight * distance(leaf_achieved, goal)
}

/// One row of the optional search trace: a sampled candidate and its fate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    /// Index of the node this candidate was sampled from.
    pub parent: usize,
    /// Index of the created child node; absent when pruned.
    pub node: Option<usize>,
    pub depth: usize,
    pub skill_id: usize,
    pub subgoal_x: f64,
    pub subgoal_y: f64,
    pub subgoal_z: f64,
    pub u: f64,
    /// Skill critic value of the edge; absent when pruned.
    pub edge_q: Option<f64>,
    pub pruned: bool,
    pub leaf_score: Option<f64>,
}

/// Everything a search produced, for inspection and oracle tests.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchTrace {
    pub nodes: Vec<TreeNode>,
    pub rows: Vec<TraceRow>,
    /// Indices of the nodes that were scored as leaves.
    pub leaves: Vec<usize>,
}

impl SearchTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Goal semantics the planner scores leaves with.
#[derive(Debug, Clone, Copy)]
pub struct PlanningGoal<'a> {
    pub task: &'a TaskSpec,
    pub goal: &'a [f64],
}

impl PlanningGoal<'_> {
    fn achieved(&self, state: &[f64]) -> Vec3 {
        self.task.achieved_goal_from_obs(state)
    }

    fn reached(&self, state: &[f64]) -> bool {
        self.task.is_success(&self.achieved(state), self.goal)
    }
}

/// Algorithm 2 as breadth-first expansion.
///
/// Every node shallower than `H` is expanded with `B` sampled candidates.
/// Candidates with `u ≤ threshold` are pruned; survivors become children
/// whose state comes from the skill's coarse dynamics and whose edge reward
/// is the skill critic's value. Children at depth `H` or whose predicted
/// state already achieves the goal are leaves, as are interior nodes all of
/// whose candidates were pruned. Returns the first hop of the leaf path with
/// the highest score, or `None` when every root candidate is pruned.
///
/// Sampling happens level by level (all of a level's nodes in creation
/// order) and model evaluations are batched per level and skill.
pub fn tree_search(
    root_state: &[f64],
    target: PlanningGoal<'_>,
    bundles: &[SkillBundle],
    cfg: &SearchConfig,
    rng: &mut ChaCha8Rng,
    trace: Option<&mut SearchTrace>,
) -> Result<Option<PathResult>> {
    if bundles.is_empty() {
        return Err(Error::InvalidInput("tree search needs at least one skill".into()));
    }
    if target.goal.len() != GOAL_DIM {
        return Err(Error::dims("goal", GOAL_DIM, target.goal.len()));
    }
    let ids: Vec<TaskId> = bundles.iter().map(SkillBundle::id).collect();
    let mut nodes = vec![TreeNode {
        predicted_state: root_state.to_vec(),
        transition_reward: 0.0,
        depth: 0,
        parent: None,
        candidate: None,
    }];
    let mut leaves = Vec::new();
    let mut frontier = vec![0usize];
    let mut rows = Vec::new();

    while !frontier.is_empty() {
        // Sample every frontier node's candidates.
        let mut pending: Vec<(usize, Candidate)> = Vec::new();
        for &n in &frontier {
            let cands =
                sample_candidates(&ids, cfg.branching, &cfg.sampler, &nodes[n].predicted_state, target.goal, rng);
            pending.extend(cands.into_iter().map(|c| (n, c)));
        }
        let evals = evaluate_candidates(&nodes, &pending, bundles)?;
        let mut next = Vec::new();
        let mut has_child = vec![false; frontier.len()];
        for ((parent, cand), eval) in pending.iter().zip(evals) {
            let depth = nodes[*parent].depth + 1;
            let mut row = TraceRow {
                parent: *parent,
                node: None,
                depth,
                skill_id: cand.skill,
                subgoal_x: cand.subgoal[0],
                subgoal_y: cand.subgoal[1],
                subgoal_z: cand.subgoal[2],
                u: eval.u,
                edge_q: None,
                pruned: true,
                leaf_score: None,
            };
            if eval.u > cfg.prune_threshold {
                let (state, q) = eval.successor.expect("survivors are evaluated");
                let id = nodes.len();
                let is_leaf = depth >= cfg.height || target.reached(&state);
                nodes.push(TreeNode {
                    predicted_state: state,
                    transition_reward: q,
                    depth,
                    parent: Some(*parent),
                    candidate: Some(*cand),
                });
                if let Some(k) = frontier.iter().position(|f| f == parent) {
                    has_child[k] = true;
                }
                row.node = Some(id);
                row.edge_q = Some(q);
                row.pruned = false;
                if is_leaf {
                    leaves.push(id);
                } else {
                    next.push(id);
                }
            }
            rows.push(row);
        }
        // Interior nodes with no surviving candidate end their path there.
        for (k, &f) in frontier.iter().enumerate() {
            if !has_child[k] && f != 0 {
                leaves.push(f);
            }
        }
        frontier = next;
    }

    let mut best: Option<(f64, f64, usize)> = None;
    for &leaf in &leaves {
        let edges = path_to(&nodes, leaf);
        let qs: Vec<f64> = edges.iter().map(|&e| nodes[e].transition_reward).collect();
        let achieved = target.achieved(&nodes[leaf].predicted_state);
        let r_final = -distance(&achieved, target.goal);
        let score = score_path(&qs, &achieved, target.goal, cfg.final_distance_weight);
        if let Some(row) = rows.iter_mut().find(|r| r.node == Some(leaf)) {
            row.leaf_score = Some(score);
        }
        if best.is_none_or(|(s, _, _)| score > s) {
            best = Some((score, r_final, leaf));
        }
    }
    let result = best.map(|(total_score, r_final, leaf)| {
        let edges = path_to(&nodes, leaf);
        PathResult {
            steps: edges.iter().map(|&e| nodes[e].candidate.expect("non-root node")).collect(),
            total_score,
            r_final,
        }
    });
    if let Some(t) = trace {
        *t = SearchTrace { nodes, rows, leaves };
    }
    Ok(result)
}

/// Node indices from the first hop down to `leaf` (root excluded).
pub fn path_to(nodes: &[TreeNode], leaf: usize) -> Vec<usize> {
    let mut path = Vec::new();
    let mut cur = leaf;
    while let Some(p) = nodes[cur].parent {
        path.push(cur);
        cur = p;
    }
    path.reverse();
    path
}

struct CandidateEval {
    u: f64,
    /// Predicted successor state and edge Q, for candidates above threshold.
    successor: Option<(Vec<f64>, f64)>,
}

/// Batched `u`, `T_coarse` and `Q` for all pending candidates, grouped by skill.
fn evaluate_candidates(
    nodes: &[TreeNode],
    pending: &[(usize, Candidate)],
    bundles: &[SkillBundle],
) -> Result<Vec<CandidateEval>> {
    let mut out: Vec<CandidateEval> = pending.iter().map(|_| CandidateEval { u: 0.0, successor: None }).collect();
    for (k, bundle) in bundles.iter().enumerate() {
        let idx: Vec<usize> = (0..pending.len()).filter(|&i| pending[i].1.skill == k).collect();
        if idx.is_empty() {
            continue;
        }
        let sdim = bundle.dynamics.state_dim;
        let mut states = Array2::zeros((idx.len(), sdim));
        let mut goals = Array2::zeros((idx.len(), GOAL_DIM));
        for (r, &i) in idx.iter().enumerate() {
            let (parent, cand) = &pending[i];
            states.row_mut(r).assign(&ndarray::aview1(&nodes[*parent].predicted_state));
            goals.row_mut(r).assign(&ndarray::aview1(&cand.subgoal));
        }
        let u = bundle.success.predict_batch(states.view(), goals.view())?;
        let successors = bundle.dynamics.predict_batch(states.view(), goals.view())?;
        let obs: Vec<Vec<f64>> = idx.iter().map(|&i| nodes[pending[i].0].predicted_state.clone()).collect();
        let subgoals: Vec<Vec3> = idx.iter().map(|&i| pending[i].1.subgoal).collect();
        let q = bundle.policy.value_batch(&obs, &subgoals)?;
        for (r, &i) in idx.iter().enumerate() {
            out[i].u = u[r];
            out[i].successor = Some((successors.row(r).to_vec(), q[r]));
        }
    }
    Ok(out)
}
