//! The observe, plan, ground, act loop and trajectory records.

mod persist;
mod run;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::{GroundedAction, HighLevelAction, Platform};
use crate::model_io::{DecodingParams, Observation, RetryPolicy, TemplateId};

pub use persist::{
    load_trajectory, persist_trajectory, read_trajectory_file, write_trajectory_file, TRAJECTORY_FORMAT,
    TRAJECTORY_VERSION,
};
pub use run::{run_episode, run_episodes, EpisodeJob};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("environment fault: {0}")]
pub struct EnvironmentFault(pub String);

/// What the environment reports back after executing an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEffect {
    pub changed: bool,
    pub note: String,
    /// T(s'|s,a) when the environment knows it.
    pub transition_prob: Option<f64>,
}

/// An interactive GUI the agent acts on. Implemented by the simulator;
/// adapters for real benchmarks would implement the same contract.
pub trait Environment: Send {
    fn platform(&self) -> Platform;
    /// Restores the task's initial state.
    fn reset(&mut self) -> Result<(), EnvironmentFault>;
    fn observe(&self) -> Result<Observation, EnvironmentFault>;
    fn apply(&mut self, action: &GroundedAction) -> Result<StepEffect, EnvironmentFault>;
    fn subgoals(&self) -> Vec<bool>;
    fn state_digest(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub goal: String,
    pub platform: Platform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    pub max_steps: usize,
    pub decoding: DecodingParams,
    pub stop_on_parse_error_after: usize,
    /// Defaults to the platform's evaluation template.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<TemplateId>,
    pub retry: RetryPolicy,
}

impl EpisodeConfig {
    pub fn new(goal: impl Into<String>, platform: Platform) -> Self {
        EpisodeConfig {
            goal: goal.into(),
            platform,
            task_id: None,
            max_steps: 30,
            decoding: DecodingParams::default(),
            stop_on_parse_error_after: 3,
            template: None,
            retry: RetryPolicy::default(),
        }
    }

    pub fn template(&self) -> TemplateId {
        self.template.unwrap_or_else(|| TemplateId::eval_for(self.platform))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    Model,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub observation: Observation,
    pub thought: String,
    /// Planner text as received; empty for human steps.
    pub raw: String,
    pub high_level: HighLevelAction,
    pub grounded: GroundedAction,
    /// Subgoal vector after the action.
    pub subgoal_snapshot: Vec<bool>,
    pub policy_prob: Option<f64>,
    pub transition_prob: Option<f64>,
    /// Environment digest after the action, used by replay verification.
    pub post_state_digest: Option<String>,
    pub author: Author,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Completed,
    Infeasible,
    StepLimit,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Endpoint,
    Parse,
    Grounding,
}

/// An iteration that produced no executable action. The environment is not
/// advanced, but the iteration counts against `max_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    pub iteration: usize,
    pub kind: FailureKind,
    pub error: String,
    pub raw: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub goal: String,
    pub platform: Platform,
    pub task_id: Option<String>,
    /// Subgoal vector before the first action.
    pub initial_subgoals: Vec<bool>,
    pub steps: Vec<Step>,
    pub terminal_status: TerminalStatus,
    pub answer: Option<String>,
    pub failures: Vec<StepFailure>,
}

impl Trajectory {
    pub fn new(goal: impl Into<String>, platform: Platform, initial_subgoals: Vec<bool>) -> Self {
        Trajectory {
            goal: goal.into(),
            platform,
            task_id: None,
            initial_subgoals,
            steps: Vec::new(),
            terminal_status: TerminalStatus::StepLimit,
            answer: None,
            failures: Vec::new(),
        }
    }

    /// Initial vector followed by each step's snapshot.
    pub fn subgoal_history(&self) -> Vec<Vec<bool>> {
        std::iter::once(self.initial_subgoals.clone())
            .chain(self.steps.iter().map(|s| s.subgoal_snapshot.clone()))
            .collect()
    }

    pub fn final_subgoals(&self) -> &[bool] {
        self.steps
            .last()
            .map(|s| s.subgoal_snapshot.as_slice())
            .unwrap_or(&self.initial_subgoals)
    }

    pub fn memory(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.high_level.summary()).collect()
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("{fault} (after {} steps)", partial.steps.len())]
    Environment {
        fault: EnvironmentFault,
        partial: Box<Trajectory>,
    },
    #[error("invalid episode config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbabilityError {
    #[error("step {0} has no policy or transition probability")]
    MissingProbability(usize),
    #[error("probability at step {0} is outside (0, 1]")]
    OutOfRange(usize),
}

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("trajectory schema version {found} is newer than supported {supported}")]
    SchemaVersionMismatch { found: u32, supported: u32 },
    #[error("not a trajectory record: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn step_probs(traj: &Trajectory) -> Result<Vec<(f64, f64)>, ProbabilityError> {
    traj.steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (Some(p), Some(t)) = (s.policy_prob, s.transition_prob) else {
                return Err(ProbabilityError::MissingProbability(i));
            };
            let ok = |v: f64| v > 0.0 && v <= 1.0;
            if ok(p) && ok(t) {
                Ok((p, t))
            } else {
                Err(ProbabilityError::OutOfRange(i))
            }
        })
        .collect()
}

/// p(s0) times the product of policy and transition terms over all steps.
pub fn trajectory_probability(traj: &Trajectory, initial_prob: f64) -> Result<f64, ProbabilityError> {
    Ok(step_probs(traj)?
        .into_iter()
        .fold(initial_prob, |acc, (p, t)| acc * p * t))
}

pub fn trajectory_log_probability(traj: &Trajectory, initial_prob: f64) -> Result<f64, ProbabilityError> {
    Ok(step_probs(traj)?
        .into_iter()
        .fold(initial_prob.ln(), |acc, (p, t)| acc + p.ln() + t.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{ActionKind, Coordinate};
    use crate::model_io::ImageRef;

    fn step(p: f64, t: f64) -> Step {
        let c = Coordinate::new(0.5, 0.5).unwrap();
        Step {
            observation: Observation {
                screenshot: ImageRef::new("s"),
                url: None,
                step_index: 0,
            },
            thought: String::new(),
            raw: String::new(),
            high_level: HighLevelAction::new("button", ActionKind::Click, None).unwrap(),
            grounded: GroundedAction::click(Platform::Mobile, c),
            subgoal_snapshot: vec![false],
            policy_prob: Some(p),
            transition_prob: Some(t),
            post_state_digest: None,
            author: Author::Model,
        }
    }

    #[test]
    fn trajectory_probability_products() {
        let mut t = Trajectory::new("g", Platform::Mobile, vec![false]);
        assert_eq!(trajectory_probability(&t, 1.0).unwrap(), 1.0);
        t.steps = vec![step(1.0, 1.0); 3];
        assert_eq!(trajectory_probability(&t, 1.0).unwrap(), 1.0);
        t.steps = vec![step(0.5, 1.0), step(0.5, 1.0)];
        assert_eq!(trajectory_probability(&t, 1.0).unwrap(), 0.25);
        assert!((trajectory_log_probability(&t, 1.0).unwrap().exp() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn missing_probability() {
        let mut t = Trajectory::new("g", Platform::Mobile, vec![false]);
        let mut s = step(0.5, 1.0);
        s.transition_prob = None;
        t.steps = vec![step(0.5, 1.0), s];
        assert_eq!(
            trajectory_probability(&t, 1.0),
            Err(ProbabilityError::MissingProbability(1))
        );
        t.steps = vec![step(0.0, 1.0)];
        assert_eq!(trajectory_probability(&t, 1.0), Err(ProbabilityError::OutOfRange(0)));
    }
}
