//! Harness and data engine for vision-based GUI agents.

pub mod actions;
pub mod datapipe;
pub mod episode;
pub mod metrics;
pub mod mixture;
pub mod model_io;
pub mod sim_env;
