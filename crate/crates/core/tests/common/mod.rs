#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use guiagent_core::episode::{run_episode, EpisodeConfig, Trajectory};
use guiagent_core::model_io::ScriptedPlanner;
use guiagent_core::sim_env::{
    oracle_solve, plan_replies, OracleResult, ScreenGraph, SimEnv, SimGrounder, TaskInstance, TaskPack, TaskSpec,
};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub struct OracleRun {
    pub graph: Arc<ScreenGraph>,
    pub task: TaskInstance,
    pub oracle: OracleResult,
    pub trajectory: Trajectory,
}

/// Runs an episode whose planner replays the oracle's plan.
pub fn oracle_episode(pack: &TaskPack, spec: &TaskSpec, seed: u64, budget: usize) -> OracleRun {
    let graph = Arc::new(pack.graph.clone());
    let task = spec.instantiate(&graph, seed);
    let oracle = oracle_solve(&graph, &task, budget).unwrap();
    let finish = if oracle.solvable { "completed" } else { "infeasible" };
    let planner = ScriptedPlanner::from_sequence(plan_replies(&oracle.plan, finish));
    let grounder = SimGrounder::new(graph.clone());
    let mut env = SimEnv::new(graph.clone(), task.clone());
    let mut cfg = EpisodeConfig::new(task.goal.clone(), task.platform);
    cfg.task_id = Some(task.id.clone());
    cfg.max_steps = oracle.plan.len() + 1;
    let trajectory = run_episode(&mut env, &planner, &grounder, &cfg).unwrap();
    OracleRun {
        graph,
        task,
        oracle,
        trajectory,
    }
}
