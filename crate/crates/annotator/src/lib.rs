//! HTTP service that lets humans record (annotate mode) or correct
//! (steer mode) trajectories in the simulator, then replay-verifies and
//! exports them as training samples.

mod api;
mod config;
mod render;
mod session;

use std::path::PathBuf;
use std::sync::Arc;

use guiagent_core::model_io::http::HttpPlanner;
use guiagent_core::model_io::PlannerClient;
use guiagent_core::sim_env::{bundled_packs, SimError, TaskPack};
use thiserror::Error;

pub use api::{
    router, ActionReceipt, ActionRequest, CreateSession, ErrorBody, FinalizeResponse, ObservationView, ProposeResponse,
    SessionCreated,
};
pub use config::{AnnotatorConfig, BIND_ENV, EXPORT_ENV, PACKS_ENV, STORE_ENV};
pub use render::{canvas_size, render_png};
pub use session::{index_packs, now_secs, LoadedPack, Mode, Packs, SessionStore};

#[derive(Debug, Error)]
pub enum AnnotatorError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Pack(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    pub packs: Arc<Packs>,
    pub store: Arc<SessionStore>,
    pub export_dir: PathBuf,
    pub planner: Option<Arc<dyn PlannerClient>>,
}

impl AppState {
    /// Loads packs, opens the session store and connects the planner named
    /// in the config (if any).
    pub fn from_config(cfg: &AnnotatorConfig) -> Result<Self, AnnotatorError> {
        let packs = if cfg.packs.is_empty() {
            bundled_packs()
        } else {
            cfg.packs
                .iter()
                .map(|p| TaskPack::load_dir(p))
                .collect::<Result<_, _>>()?
        };
        let packs = index_packs(packs)?;
        let store = match &cfg.session_store {
            Some(dir) => SessionStore::open(dir, cfg.session_ttl_secs, &packs)?,
            None => SessionStore::in_memory(cfg.session_ttl_secs),
        };
        let planner = HttpPlanner::from_config(&cfg.endpoints).map(|p| Arc::new(p) as Arc<dyn PlannerClient>);
        Ok(AppState {
            packs: Arc::new(packs),
            store: Arc::new(store),
            export_dir: cfg.export_dir.clone(),
            planner,
        })
    }

    pub fn with_planner(mut self, planner: Arc<dyn PlannerClient>) -> Self {
        self.planner = Some(planner);
        self
    }
}

/// Binds `cfg.bind` and serves until the process is stopped.
pub async fn serve(cfg: AnnotatorConfig) -> Result<(), AnnotatorError> {
    let state = AppState::from_config(&cfg)?;
    let listener = tokio::net::TcpListener::bind(&cfg.bind).await?;
    axum::serve(listener, router(state)).await?;
    Ok(())
}
