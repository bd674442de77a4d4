//! Source-dataset ingestion into a common sample schema, hinted thought
//! generation with a consistency filter, and replay verification.

mod adapters;
pub mod catalog;
mod cot;
mod equiv;
mod replay;
mod sample;

use thiserror::Error;

pub use adapters::{
    grounded_value, gui_sample, ingest, ingest_str, samples_from_trajectory, IngestOptions, IngestReport, Reject,
    ADAPTERS,
};
pub use cot::{
    augment_batch, augment_cot, hint_text, template_for, write_discard_log, CotAttempt, CotAugmentConfig, CotOutcome,
    CotStep, HINT_LEAK_PHRASES,
};
pub use equiv::{actions_equivalent, DEFAULT_TOLERANCE};
pub use replay::{replay_verify, replay_verify_sim, ReplayReport};
pub use sample::{
    read_samples, read_samples_file, write_samples, write_samples_file, GuiStep, HintAction, Modality, StandardSample,
    TypeTag, SAMPLES_FORMAT, SAMPLES_VERSION,
};

#[derive(Debug, Error)]
pub enum DatapipeError {
    #[error("{adapter} record {index}: {message}")]
    AdapterSchema {
        adapter: String,
        index: usize,
        message: String,
    },
    #[error("unknown adapter `{0}`")]
    UnknownAdapter(String),
    #[error("sample file version {found} is not supported (expected {supported})")]
    SchemaVersion { found: String, supported: u32 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DatapipeError {
    pub(crate) fn schema(adapter: &str, index: usize, message: impl std::fmt::Display) -> Self {
        DatapipeError::AdapterSchema {
            adapter: adapter.to_string(),
            index,
            message: message.to_string(),
        }
    }
}
