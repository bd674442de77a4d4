use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sampling::InterleaveMode;
use super::schedule::LrKind;
use super::MixtureError;
use crate::datapipe::{catalog, read_samples_file};

/// Mid-to-GUI proportion of the base experiments: one 150K domain against
/// the full post-training GUI pool.
pub const BASE_RATIO: (u64, u64) = (150_000, 56_062);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Middle,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainQuota {
    pub domain: String,
    pub count: u64,
    /// Datasets pooled for this domain; defaults to the catalog's datasets
    /// of the same domain.
    #[serde(default)]
    pub sources: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuiPool {
    pub sources: Vec<String>,
}

impl Default for GuiPool {
    fn default() -> Self {
        GuiPool {
            sources: catalog::POST_TRAINING.iter().map(|e| e.dataset.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scaling {
    /// Cycle the GUI pool when the mid volume calls for more GUI samples
    /// than exist; otherwise clip to the pool.
    #[serde(default = "yes")]
    pub duplicate_gui: bool,
}

fn yes() -> bool {
    true
}

impl Default for Scaling {
    fn default() -> Self {
        Scaling { duplicate_gui: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub base_lr: f64,
    pub warmup_ratio: f64,
    #[serde(default)]
    pub kind: LrKind,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec {
            base_lr: 2e-5,
            warmup_ratio: 0.05,
            kind: LrKind::Cosine,
        }
    }
}

/// Recorded for the trainer; does not affect the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerMeta {
    pub batch_size: u32,
    pub grad_accum: u32,
}

impl Default for TrainerMeta {
    fn default() -> Self {
        TrainerMeta {
            batch_size: 2,
            grad_accum: 2,
        }
    }
}

/// Where a dataset's sample ids come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    /// Synthetic id-only dataset of this size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<u64>,
    /// Sample file whose ids are used, relative to the spec file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub quotas: Vec<DomainQuota>,
    #[serde(default)]
    pub gui_pool: GuiPool,
    /// `[mid, gui]` proportion used to size the GUI share of segment A.
    #[serde(default = "base_ratio")]
    pub mid_to_gui_ratio: [u64; 2],
    /// Mix GUI samples into segment A.
    #[serde(default = "yes")]
    pub mixing: bool,
    #[serde(default)]
    pub interleave: InterleaveMode,
    #[serde(default)]
    pub scaling: Scaling,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub trainer: TrainerMeta,
    /// Overrides for dataset resolution; unlisted datasets are synthetic
    /// at their catalog size.
    #[serde(default)]
    pub datasets: BTreeMap<String, DatasetSource>,
}

fn base_ratio() -> [u64; 2] {
    [BASE_RATIO.0, BASE_RATIO.1]
}

impl MixtureSpec {
    pub fn from_toml_str(s: &str) -> Result<Self, MixtureError> {
        let spec: MixtureSpec = toml::from_str(s).map_err(|e| MixtureError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, MixtureError> {
        let mut spec = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for src in spec.datasets.values_mut() {
            if let Some(p) = &src.path {
                src.path = Some(base.join(p));
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MixtureError> {
        let bad = |m: String| Err(MixtureError::InvalidSpec(m));
        if self.mid_to_gui_ratio.contains(&0) {
            return bad("ratio components must be positive".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for q in &self.quotas {
            if !seen.insert(q.domain.as_str()) {
                return bad(format!("domain `{}` listed twice", q.domain));
            }
            if q.sources.is_empty() && catalog::MID_TRAINING.iter().all(|e| e.domain != q.domain) {
                return bad(format!("domain `{}` has no sources", q.domain));
            }
        }
        if !(0.0..1.0).contains(&self.schedule.warmup_ratio) {
            return bad("warmup_ratio must be in [0, 1)".into());
        }
        for (name, d) in &self.datasets {
            if d.size.is_some() == d.path.is_some() {
                return bad(format!("dataset `{name}` needs exactly one of size or path"));
            }
        }
        Ok(())
    }

    pub fn ratio(&self) -> (u64, u64) {
        (self.mid_to_gui_ratio[0], self.mid_to_gui_ratio[1])
    }

    pub fn quota_sources(&self, q: &DomainQuota) -> Vec<String> {
        if !q.sources.is_empty() {
            return q.sources.clone();
        }
        catalog::MID_TRAINING
            .iter()
            .filter(|e| e.domain == q.domain)
            .map(|e| e.dataset.to_string())
            .collect()
    }

    /// Stable digest of the spec's canonical JSON form.
    pub fn digest(&self) -> String {
        let body = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(body))
    }

    /// Ids of a dataset plus a digest of its content.
    pub fn resolve(&self, dataset: &str) -> Result<(Vec<String>, String), MixtureError> {
        let over = self.datasets.get(dataset);
        if let Some(path) = over.and_then(|d| d.path.as_ref()) {
            let bytes = std::fs::read(path)?;
            let samples =
                read_samples_file(path).map_err(|e| MixtureError::Dataset(format!("{}: {e}", path.display())))?;
            return Ok((
                samples.into_iter().map(|s| s.id).collect(),
                hex::encode(Sha256::digest(bytes)),
            ));
        }
        let size = over
            .and_then(|d| d.size)
            .or_else(|| catalog::lookup(dataset).map(|e| e.samples))
            .ok_or_else(|| MixtureError::Dataset(format!("unknown dataset `{dataset}`")))?;
        let digest = hex::encode(Sha256::digest(format!("synthetic:{dataset}:{size}")));
        Ok(((0..size).map(|i| format!("{dataset}#{i}")).collect(), digest))
    }
}
