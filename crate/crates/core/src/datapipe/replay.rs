//! Re-execution of recorded trajectories against a fresh environment.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::episode::{Environment, Trajectory};
use crate::sim_env::{ScreenGraph, SimEnv, TaskInstance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    /// The final subgoal vector is all true.
    pub pass: bool,
    /// First step whose recorded post-state digest differs from the replay,
    /// or whose action the environment refused.
    pub diverged_at: Option<usize>,
    pub final_subgoals: Vec<bool>,
    pub steps_replayed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Resets `env` and replays the trajectory's grounded actions.
pub fn replay_verify(traj: &Trajectory, env: &mut dyn Environment) -> ReplayReport {
    let mut report = ReplayReport {
        pass: false,
        diverged_at: None,
        final_subgoals: Vec::new(),
        steps_replayed: 0,
        error: None,
    };
    if let Err(e) = env.reset() {
        report.error = Some(e.to_string());
        return report;
    }
    for (i, step) in traj.steps.iter().enumerate() {
        if let Err(e) = env.apply(&step.grounded) {
            report.diverged_at.get_or_insert(i);
            report.error = Some(e.to_string());
            break;
        }
        report.steps_replayed = i + 1;
        let digest_differs = step
            .post_state_digest
            .as_ref()
            .is_some_and(|d| *d != env.state_digest());
        if digest_differs && report.diverged_at.is_none() {
            report.diverged_at = Some(i);
        }
    }
    report.final_subgoals = env.subgoals();
    report.pass = report.error.is_none() && report.final_subgoals.iter().all(|b| *b);
    report
}

/// Replays against a fresh simulator for `task`.
pub fn replay_verify_sim(traj: &Trajectory, graph: Arc<ScreenGraph>, task: &TaskInstance) -> ReplayReport {
    let mut env = SimEnv::new(graph, task.clone());
    replay_verify(traj, &mut env)
}
