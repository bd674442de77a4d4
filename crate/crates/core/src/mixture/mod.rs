//! Mid-training mixtures: per-domain quota sampling, GUI interleaving,
//! duplication scaling and two-segment manifests with one learning-rate
//! schedule.

mod manifest;
mod sampling;
mod schedule;
mod spec;

use thiserror::Error;

pub use manifest::{
    build_manifest, ManifestEntry, ManifestHeader, Segment, TrainingManifest, MANIFEST_FORMAT, MANIFEST_VERSION,
};
pub use sampling::{
    effective_volume, interleave, interleave_pattern, realize_plan, rng_for, sample_domain, scale_with_duplication,
    shuffled, DuplicationPlan, InterleaveMode,
};
pub use schedule::{lr_schedule, resume_cosine, warmup_steps, LrKind, LrSchedule, ResumeCosine};
pub use spec::{
    DatasetSource, Difficulty, DomainQuota, GuiPool, MixtureSpec, Scaling, ScheduleSpec, TrainerMeta, BASE_RATIO,
};

#[derive(Debug, Error)]
pub enum MixtureError {
    #[error("domain `{domain}` has {available} samples, quota is {quota}")]
    InsufficientData {
        domain: String,
        available: usize,
        quota: usize,
    },
    #[error("invalid mixture spec: {0}")]
    InvalidSpec(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mixture specs shipped with the crate.
pub fn bundled_spec(name: &str) -> Option<MixtureSpec> {
    let src = match name {
        "guimid" => include_str!("../../../../configs/guimid.toml"),
        "mathinstruct_150k" => include_str!("../../../../configs/mathinstruct_150k.toml"),
        "mathinstruct_150k_nomix" => include_str!("../../../../configs/mathinstruct_150k_nomix.toml"),
        _ => return None,
    };
    Some(MixtureSpec::from_toml_str(src).expect("bundled spec is valid"))
}
