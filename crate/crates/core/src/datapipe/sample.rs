use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::DatapipeError;
use crate::actions::{ground, ActionError, Coordinate, GroundedAction, HighLevelAction, Platform};
use crate::model_io::{ChatMessage, Role};

pub const SAMPLES_FORMAT: &str = "guiagent.samples";
pub const SAMPLES_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    VisionLanguage,
    Language,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeTag {
    Instruction,
    Thought,
    Answer,
    Action,
}

/// A ground-truth step action: what to do and, for targeted kinds, where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintAction {
    pub platform: Platform,
    pub action: HighLevelAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord: Option<Coordinate>,
}

impl HintAction {
    /// Validates the action against the platform's action space.
    pub fn new(platform: Platform, action: HighLevelAction, coord: Option<Coordinate>) -> Result<Self, ActionError> {
        action.validate(Some(platform))?;
        Ok(HintAction {
            platform,
            action,
            coord,
        })
    }

    pub fn grounded(&self) -> Result<GroundedAction, ActionError> {
        let coord = if self.action.needs_target(self.platform) {
            self.coord
        } else {
            None
        };
        ground(&self.action, coord, self.platform)
    }
}

/// Structured fields of a GUI trajectory step, kept beside the rendered
/// messages so samples can be re-augmented and compared field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuiStep {
    pub goal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default)]
    pub history: Vec<String>,
    pub thought: String,
    pub action: HintAction,
}

/// One training example in the common schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardSample {
    pub id: String,
    pub domain: String,
    pub source: String,
    pub modality: Modality,
    pub messages: Vec<ChatMessage>,
    pub type_tags: Vec<TypeTag>,
    pub thought_optional: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gui: Option<GuiStep>,
}

impl StandardSample {
    /// Checks role alternation and tag presence. Image files are checked
    /// separately by [`StandardSample::missing_images`].
    pub fn validate(&self) -> Result<(), String> {
        if self.type_tags.is_empty() {
            return Err("type_tags is empty".into());
        }
        let body = match self.messages.first() {
            Some(m) if m.role == Role::System => &self.messages[1..],
            _ => &self.messages[..],
        };
        if body.is_empty() {
            return Err("no user/assistant messages".into());
        }
        for (i, m) in body.iter().enumerate() {
            let want = if i % 2 == 0 { Role::User } else { Role::Assistant };
            if m.role != want {
                return Err(format!("message {i} should be {want:?}, found {:?}", m.role));
            }
        }
        if self.modality == Modality::Language && self.messages.iter().any(|m| m.images().next().is_some()) {
            return Err("language sample carries images".into());
        }
        Ok(())
    }

    /// Image paths that do not exist relative to `root`.
    pub fn missing_images(&self, root: &Path) -> Vec<String> {
        self.messages
            .iter()
            .flat_map(|m| m.images())
            .filter_map(|img| img.path.clone())
            .filter(|p| !root.join(p).is_file())
            .collect()
    }

    pub fn assistant_text(&self) -> Option<String> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::Assistant)
            .map(ChatMessage::text)
    }
}

pub fn write_samples<W: Write>(mut w: W, samples: &[StandardSample]) -> Result<(), DatapipeError> {
    writeln!(w, "{}", json!({ "format": SAMPLES_FORMAT, "version": SAMPLES_VERSION }))?;
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_samples<R: BufRead>(r: R) -> Result<Vec<StandardSample>, DatapipeError> {
    let mut lines = r.lines().filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()));
    let Some(header) = lines.next() else {
        return Ok(Vec::new());
    };
    let header: serde_json::Value = serde_json::from_str(&header?)?;
    let version = header["version"].as_u64().unwrap_or(0);
    if header["format"] != SAMPLES_FORMAT || version != u64::from(SAMPLES_VERSION) {
        return Err(DatapipeError::SchemaVersion {
            found: header["version"].to_string(),
            supported: SAMPLES_VERSION,
        });
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let s: StandardSample = serde_json::from_str(&l?).map_err(|e| DatapipeError::schema("standard", i, e))?;
            s.validate().map_err(|e| DatapipeError::schema("standard", i, e))?;
            Ok(s)
        })
        .collect()
}

pub fn write_samples_file(path: &Path, samples: &[StandardSample]) -> Result<(), DatapipeError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_samples(&mut w, samples)?;
    w.flush()?;
    Ok(())
}

pub fn read_samples_file(path: &Path) -> Result<Vec<StandardSample>, DatapipeError> {
    read_samples(std::io::BufReader::new(std::fs::File::open(path)?))
}
