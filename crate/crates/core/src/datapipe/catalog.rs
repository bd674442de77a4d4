//! Known source datasets with their domains and published sizes.

use serde::{Deserialize, Serialize};

use super::sample::{Modality, TypeTag};
use crate::actions::Platform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ability {
    Perception,
    Reasoning,
    Interaction,
    Knowledge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub domain: &'static str,
    pub dataset: &'static str,
    pub samples: u64,
    pub modality: Modality,
    pub type_tags: &'static [TypeTag],
    /// Some records of the dataset legitimately carry no thought.
    pub thought_optional: bool,
    pub ability: Option<Ability>,
    /// Adapter that ingests this dataset's trajectory dump.
    pub adapter: Option<&'static str>,
    pub platform: Option<Platform>,
}

use Ability::*;
use Modality::*;
use TypeTag::*;

const ITA: &[TypeTag] = &[Instruction, Thought, Answer];
const IA: &[TypeTag] = &[Instruction, Answer];
const ITX: &[TypeTag] = &[Instruction, Thought, Action];

const fn mid(
    domain: &'static str,
    ability: Ability,
    dataset: &'static str,
    samples: u64,
    type_tags: &'static [TypeTag],
    thought_optional: bool,
    modality: Modality,
) -> CatalogEntry {
    CatalogEntry {
        domain,
        dataset,
        samples,
        modality,
        type_tags,
        thought_optional,
        ability: Some(ability),
        adapter: None,
        platform: None,
    }
}

const fn gui(
    domain: &'static str,
    dataset: &'static str,
    samples: u64,
    adapter: &'static str,
    platform: Platform,
) -> CatalogEntry {
    CatalogEntry {
        domain,
        dataset,
        samples,
        modality: VisionLanguage,
        type_tags: ITX,
        thought_optional: false,
        ability: None,
        adapter: Some(adapter),
        platform: Some(platform),
    }
}

/// Mid-training datasets, grouped by domain.
pub const MID_TRAINING: &[CatalogEntry] = &[
    mid(
        "Chart/Document QA",
        Perception,
        "InfographicVQA",
        2_184,
        ITA,
        true,
        VisionLanguage,
    ),
    mid(
        "Chart/Document QA",
        Perception,
        "Ureader QA",
        53_794,
        ITA,
        false,
        VisionLanguage,
    ),
    mid(
        "Chart/Document QA",
        Perception,
        "MPDocVQA",
        431,
        ITA,
        false,
        VisionLanguage,
    ),
    mid(
        "Chart/Document QA",
        Perception,
        "MathV360k",
        93_591,
        ITA,
        false,
        VisionLanguage,
    ),
    mid(
        "Non-GUI Perception",
        Perception,
        "Ureader OCR",
        6_146,
        ITA,
        true,
        VisionLanguage,
    ),
    mid(
        "Non-GUI Perception",
        Perception,
        "DUE",
        143_854,
        IA,
        false,
        VisionLanguage,
    ),
    mid(
        "GUI Perception",
        Perception,
        "MultiUI",
        150_000,
        IA,
        false,
        VisionLanguage,
    ),
    mid(
        "Web Screenshot2Code",
        Perception,
        "Web2Code",
        150_000,
        IA,
        false,
        VisionLanguage,
    ),
    mid(
        "Multi-modal Math",
        Reasoning,
        "Mavis",
        150_000,
        ITA,
        false,
        VisionLanguage,
    ),
    mid(
        "Multi-round Visual Conversation",
        Interaction,
        "SVIT",
        150_000,
        ITA,
        false,
        VisionLanguage,
    ),
    mid(
        "Non-GUI Agent Trajectories",
        Interaction,
        "AlfWorld",
        51_780,
        ITA,
        false,
        VisionLanguage,
    ),
    mid("MathInstruct", Reasoning, "MathInstruct", 150_000, ITA, false, Language),
    mid("Olympiad Math", Reasoning, "NuminaMath", 150_000, ITA, false, Language),
    mid("CodeI/O", Reasoning, "CodeI/O", 150_000, ITA, false, Language),
    mid("Web Knowledge Base", Knowledge, "Synatra", 99_924, ITA, false, Language),
    mid(
        "Web Knowledge Base",
        Knowledge,
        "AgentTrek",
        50_076,
        ITA,
        false,
        Language,
    ),
];

/// Post-training GUI trajectory datasets.
pub const POST_TRAINING: &[CatalogEntry] = &[
    gui("Web", "OS-Genesis (Web)", 3_789, "os_genesis_web", Platform::Web),
    gui("Web", "MM-Mind2Web", 21_542, "mm_mind2web", Platform::Web),
    gui("Web", "VisualWebArena", 3_264, "vwa_annotations", Platform::Web),
    gui(
        "Mobile",
        "OS-Genesis (Mobile)",
        4_941,
        "os_genesis_mobile",
        Platform::Mobile,
    ),
    gui("Mobile", "Aguvis", 22_526, "aguvis", Platform::Mobile),
];

/// Looks a dataset up by name, ignoring case and punctuation.
pub fn lookup(dataset: &str) -> Option<&'static CatalogEntry> {
    let key = |s: &str| {
        s.chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect::<String>()
    };
    let want = key(dataset);
    MID_TRAINING
        .iter()
        .chain(POST_TRAINING)
        .find(|e| key(e.dataset) == want)
}

pub fn by_adapter(adapter: &str) -> Option<&'static CatalogEntry> {
    POST_TRAINING.iter().find(|e| e.adapter == Some(adapter))
}

/// Total sample count of a domain across its datasets.
pub fn domain_total(domain: &str) -> u64 {
    MID_TRAINING
        .iter()
        .chain(POST_TRAINING)
        .filter(|e| e.domain == domain)
        .map(|e| e.samples)
        .sum()
}

/// Size of the full post-training GUI pool.
pub fn gui_pool_size() -> u64 {
    POST_TRAINING.iter().map(|e| e.samples).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals() {
        assert_eq!(gui_pool_size(), 56_062);
        assert_eq!(domain_total("Web"), 28_595);
        assert_eq!(domain_total("Mobile"), 27_467);
        assert_eq!(domain_total("Web Knowledge Base"), 150_000);
        assert_eq!(domain_total("Chart/Document QA"), 150_000);
        assert_eq!(domain_total("Non-GUI Perception"), 150_000);
    }

    #[test]
    fn lookup_is_lenient() {
        assert_eq!(lookup("os-genesis web").unwrap().adapter, Some("os_genesis_web"));
        assert_eq!(lookup("codeio").unwrap().domain, "CodeI/O");
        assert!(lookup("nope").is_none());
    }
}
