//! Two-segment training manifests on a single learning-rate timeline.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sampling::{
    effective_volume, interleave, realize_plan, sample_domain, scale_with_duplication, shuffled, DuplicationPlan,
    InterleaveMode,
};
use super::schedule::{lr_schedule, LrSchedule};
use super::spec::{MixtureSpec, ScheduleSpec, TrainerMeta};
use super::MixtureError;
use crate::datapipe::catalog;

pub const MANIFEST_FORMAT: &str = "guiagent.manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    /// Mid-training data with GUI trajectories mixed in.
    A,
    /// One pass over the GUI trajectories.
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub step: u64,
    pub segment: Segment,
    pub domain: String,
    pub source: String,
    pub id: String,
    pub gui: bool,
    /// Duplication pass of a GUI sample in segment A.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub spec_digest: String,
    pub dataset_digests: BTreeMap<String, String>,
    pub segment_a: u64,
    pub segment_b: u64,
    pub mid_samples: u64,
    pub gui_in_a: u64,
    pub domain_counts: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplication: Option<DuplicationPlan>,
    pub effective_mid_volume: u64,
    pub interleave: InterleaveMode,
    pub schedule: ScheduleSpec,
    pub lr: LrSchedule,
    pub trainer: TrainerMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingManifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
    /// Learning rate at each manifest step.
    pub schedule: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Item {
    domain: String,
    source: String,
    id: String,
    gui: bool,
    pass: Option<u64>,
}

fn pool(
    spec: &MixtureSpec,
    sources: &[String],
    domain: Option<&str>,
    gui: bool,
    digests: &mut BTreeMap<String, String>,
) -> Result<Vec<Item>, MixtureError> {
    let mut out = Vec::new();
    for src in sources {
        let (ids, digest) = spec.resolve(src)?;
        digests.insert(src.clone(), digest);
        let dom = match domain {
            Some(d) => d.to_string(),
            None => catalog::lookup(src)
                .map(|e| e.domain.to_string())
                .unwrap_or_else(|| "GUI".into()),
        };
        out.extend(ids.into_iter().map(|id| Item {
            domain: dom.clone(),
            source: src.clone(),
            id,
            gui,
            pass: None,
        }));
    }
    Ok(out)
}

pub fn build_manifest(spec: &MixtureSpec) -> Result<TrainingManifest, MixtureError> {
    spec.validate()?;
    let seed = spec.seed;
    let mut digests = BTreeMap::new();
    let mut domain_counts = BTreeMap::new();
    let mut mid = Vec::new();
    for q in &spec.quotas {
        let items = pool(spec, &spec.quota_sources(q), Some(&q.domain), false, &mut digests)?;
        let picked = sample_domain(&items, q.count as usize, seed, &q.domain)?;
        domain_counts.insert(q.domain.clone(), picked.len() as u64);
        mid.extend(picked);
    }
    let gui_pool = pool(spec, &spec.gui_pool.sources, None, true, &mut digests)?;

    let (gui_a, duplication) = if spec.mixing && !gui_pool.is_empty() {
        let mut plan = scale_with_duplication(mid.len() as u64, gui_pool.len() as u64, spec.ratio());
        if !spec.scaling.duplicate_gui && plan.full_passes >= 1 {
            plan = DuplicationPlan {
                required: plan.pool,
                full_passes: 1,
                remainder: 0,
                factor: 1.0,
                ..plan
            };
        }
        let items = realize_plan(&gui_pool, &plan, seed)
            .into_iter()
            .map(|(it, pass)| Item { pass: Some(pass), ..it })
            .collect::<Vec<_>>();
        (items, Some(plan))
    } else {
        (Vec::new(), None)
    };
    let gui_in_a = gui_a.len() as u64;
    let segment_a = interleave(&mid, &gui_a, seed, spec.interleave);
    let segment_b = shuffled(&gui_pool, seed, "segment_b");

    let total = (segment_a.len() + segment_b.len()) as u64;
    let lr = lr_schedule(
        total.saturating_sub(1).max(1),
        spec.schedule.base_lr,
        spec.schedule.warmup_ratio,
        spec.schedule.kind,
    );
    let schedule: Vec<f64> = (0..total).map(|s| lr.lr(s)).collect();
    let (na, nb) = (segment_a.len() as u64, segment_b.len() as u64);
    let entries = segment_a
        .into_iter()
        .map(|it| (Segment::A, it))
        .chain(segment_b.into_iter().map(|it| (Segment::B, it)))
        .enumerate()
        .map(|(step, (segment, it))| ManifestEntry {
            step: step as u64,
            segment,
            domain: it.domain,
            source: it.source,
            id: it.id,
            gui: it.gui,
            pass: it.pass,
        })
        .collect();
    let mid_samples = mid.len() as u64;
    let header = ManifestHeader {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        name: spec.name.clone(),
        seed,
        spec_digest: spec.digest(),
        dataset_digests: digests,
        segment_a: na,
        segment_b: nb,
        mid_samples,
        gui_in_a,
        domain_counts,
        duplication,
        effective_mid_volume: if total == 0 {
            0
        } else {
            effective_volume(total, mid_samples as f64 / total as f64)
        },
        interleave: spec.interleave,
        schedule: spec.schedule,
        lr,
        trainer: spec.trainer,
    };
    Ok(TrainingManifest {
        header,
        entries,
        schedule,
    })
}

impl TrainingManifest {
    pub fn segment(&self, s: Segment) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.segment == s)
    }

    /// The manifest file: header line, then one entry per line.
    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.entries.len() * 96);
        serde_json::to_writer(&mut out, &self.header).expect("header serializes");
        out.push(b'\n');
        for e in &self.entries {
            serde_json::to_writer(&mut out, e).expect("entry serializes");
            out.push(b'\n');
        }
        out
    }

    pub fn schedule_json(&self) -> Vec<u8> {
        serde_json::to_vec(&self.schedule).expect("schedule serializes")
    }

    /// Digest over both files.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_jsonl());
        h.update(self.schedule_json());
        hex::encode(h.finalize())
    }

    /// Writes `manifest.jsonl`, `schedule.json` and `manifest.sha256`;
    /// returns the digest.
    pub fn write_dir(&self, dir: &Path) -> Result<String, MixtureError> {
        std::fs::create_dir_all(dir)?;
        let manifest = self.to_jsonl();
        let schedule = self.schedule_json();
        std::fs::write(dir.join("manifest.jsonl"), &manifest)?;
        std::fs::write(dir.join("schedule.json"), &schedule)?;
        let digest = {
            let mut h = Sha256::new();
            h.update(&manifest);
            h.update(&schedule);
            hex::encode(h.finalize())
        };
        let mut f = std::fs::File::create(dir.join("manifest.sha256"))?;
        writeln!(f, "{digest}  manifest.jsonl+schedule.json")?;
        Ok(digest)
    }
}
