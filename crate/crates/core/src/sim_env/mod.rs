//! Deterministic scripted GUI environment, subgoal predicates and a
//! breadth-first oracle.

mod env;
pub mod generate;
mod oracle;
mod spec;
mod state;

use thiserror::Error;

pub use env::{asset_dir_of, plan_replies, SimEnv, SimGrounder};
pub use generate::generate_pack;
pub use oracle::{oracle_solve, oracle_solve_with_cap, OracleResult, PlanStep, DEFAULT_NODE_CAP};
pub use spec::{
    tasks_from_toml_str, validate_tasks, Effect, Element, EnvFile, Predicate, Screen, ScreenGraph, TaskFile,
    TaskInstance, TaskPack, TaskSpec, PACK_FORMAT_VERSION,
};
pub use state::{
    apply, evaluate_predicate, evaluate_subgoals, hit_point, hit_test, render_key, stop_answer, ApplyReport, Outcome,
    SimState, Tab,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("{location}: {message}")]
    Spec { location: String, message: String },
    #[error("search budget of {nodes} nodes exceeded")]
    SearchBudgetExceeded { nodes: usize },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
}

/// Bundled web fixture: a code forge with a forum.
pub fn mini_gitlab() -> TaskPack {
    TaskPack::from_strs(
        include_str!("../../packs/mini-gitlab/env.toml"),
        include_str!("../../packs/mini-gitlab/tasks.toml"),
    )
    .expect("bundled mini-gitlab pack is valid")
}

/// Bundled mobile fixture: launcher, settings and notes apps.
pub fn mini_phone() -> TaskPack {
    TaskPack::from_strs(
        include_str!("../../packs/mini-phone/env.toml"),
        include_str!("../../packs/mini-phone/tasks.toml"),
    )
    .expect("bundled mini-phone pack is valid")
}

pub fn bundled_packs() -> Vec<TaskPack> {
    vec![mini_gitlab(), mini_phone()]
}
