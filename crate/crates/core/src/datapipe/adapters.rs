//! Source-dataset adapters. Each adapter reads JSON-lines records of one
//! documented source schema (see `docs/adapters.md`) and converts them to
//! [`StandardSample`]s. Records that parse but cannot be represented are
//! rejected with a reason; records that violate the schema abort ingestion.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::catalog::{self, CatalogEntry};
use super::sample::{read_samples, GuiStep, HintAction, Modality, StandardSample, TypeTag};
use super::DatapipeError;
use crate::actions::value::normalize_value;
use crate::actions::{parse_grounded, ActionKind, Coordinate, GroundedAction, HighLevelAction, Platform};
use crate::episode::Trajectory;
use crate::model_io::{
    build_planner_prompt, render_planner_reply, ChatMessage, ContentPart, ImageRef, Observation, Role, TemplateId,
};

pub const ADAPTERS: [&str; 7] = [
    "os_genesis_web",
    "os_genesis_mobile",
    "mm_mind2web",
    "vwa_annotations",
    "aguvis",
    "instruct",
    "standard",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// Zero-based record index among non-blank lines.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub adapter: String,
    pub records: usize,
    pub samples: Vec<StandardSample>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// When set, samples whose image paths do not resolve under this
    /// directory are rejected.
    pub image_root: Option<PathBuf>,
}

/// Ingests a source file; image paths resolve relative to its directory.
pub fn ingest(path: &Path, adapter: &str) -> Result<IngestReport, DatapipeError> {
    let text = std::fs::read_to_string(path)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    ingest_str(&text, adapter, &IngestOptions { image_root: Some(root) })
}

pub fn ingest_str(text: &str, adapter: &str, opts: &IngestOptions) -> Result<IngestReport, DatapipeError> {
    let converted: Vec<Result<StandardSample, String>> = match adapter {
        "os_genesis_web" => convert_all::<OsGenesisWeb>(adapter, text)?,
        "os_genesis_mobile" => convert_all::<OsGenesisMobile>(adapter, text)?,
        "mm_mind2web" => convert_all::<MindWeb>(adapter, text)?,
        "vwa_annotations" => convert_all::<VwaStep>(adapter, text)?,
        "aguvis" => convert_all::<Aguvis>(adapter, text)?,
        "instruct" => convert_all::<Instruct>(adapter, text)?,
        "standard" => read_samples(text.as_bytes())?.into_iter().map(Ok).collect(),
        other => return Err(DatapipeError::UnknownAdapter(other.to_string())),
    };
    let mut report = IngestReport {
        adapter: adapter.to_string(),
        records: converted.len(),
        samples: Vec::new(),
        rejects: Vec::new(),
    };
    for (index, r) in converted.into_iter().enumerate() {
        let checked = r.and_then(|s| {
            s.validate()?;
            match &opts.image_root {
                Some(root) => match s.missing_images(root).first() {
                    Some(p) => Err(format!("image `{p}` not found")),
                    None => Ok(s),
                },
                None => Ok(s),
            }
        });
        match checked {
            Ok(s) => report.samples.push(s),
            Err(reason) => report.rejects.push(Reject { index, reason }),
        }
    }
    Ok(report)
}

trait SourceRecord: DeserializeOwned {
    fn convert(self) -> Result<StandardSample, String>;
}

fn convert_all<T: SourceRecord>(
    adapter: &str,
    text: &str,
) -> Result<Vec<Result<StandardSample, String>>, DatapipeError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let rec: T = serde_json::from_str(line).map_err(|e| DatapipeError::schema(adapter, i, e))?;
            Ok(rec.convert())
        })
        .collect()
}

/// Builds a post-training sample: the evaluation prompt with the
/// screenshot as the user turn and the thought plus action block as the
/// assistant turn.
pub fn gui_sample(id: String, entry: &CatalogEntry, step: GuiStep, image: ImageRef) -> Result<StandardSample, String> {
    let platform = step.action.platform;
    let url = match platform {
        Platform::Web => Some(step.url.clone().unwrap_or_default()),
        Platform::Mobile => None,
    };
    let obs = Observation {
        screenshot: image,
        url,
        step_index: step.history.len(),
    };
    let mut messages = build_planner_prompt(&step.goal, &step.history, &obs, TemplateId::eval_for(platform))
        .map_err(|e| e.to_string())?;
    messages.push(ChatMessage::assistant_text(render_planner_reply(
        &step.thought,
        &step.action.action,
    )));
    let mut type_tags = vec![TypeTag::Instruction];
    if !step.thought.trim().is_empty() {
        type_tags.push(TypeTag::Thought);
    }
    type_tags.push(TypeTag::Action);
    Ok(StandardSample {
        id,
        domain: entry.domain.to_string(),
        source: entry.dataset.to_string(),
        modality: Modality::VisionLanguage,
        messages,
        type_tags,
        thought_optional: false,
        gui: Some(step),
    })
}

fn entry(adapter: &str) -> &'static CatalogEntry {
    catalog::by_adapter(adapter).expect("adapter is catalogued")
}

fn image(path: &str) -> ImageRef {
    ImageRef::with_path(path, path)
}

fn kind_of(raw: &str, aliases: &[(&str, ActionKind)]) -> Result<ActionKind, String> {
    let k = raw.trim().to_ascii_lowercase();
    aliases
        .iter()
        .find(|(a, _)| *a == k)
        .map(|(_, kind)| Ok(*kind))
        .unwrap_or_else(|| ActionKind::from_str(&k))
}

fn scalar(v: Option<Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s),
        Value::Null => None,
        other => Some(other.to_string()),
    }
}

/// Assembles and validates a hint; targeted kinds must carry a coordinate
/// unless `coord_optional`.
fn hint(
    platform: Platform,
    kind: ActionKind,
    desc: &str,
    value: Option<String>,
    coord: Option<Coordinate>,
    coord_optional: bool,
) -> Result<HintAction, String> {
    let action = HighLevelAction::new(desc, kind, value).map_err(|e| e.to_string())?;
    let needs = action.needs_target(platform);
    if needs && coord.is_none() && !coord_optional {
        return Err(format!("`{kind}` without a coordinate"));
    }
    let coord = if needs { coord } else { None };
    let h = HintAction::new(platform, action, coord).map_err(|e| e.to_string())?;
    normalize_value(kind, platform, h.action.value.as_deref()).map_err(|e| e.to_string())?;
    if h.coord.is_some() || !needs {
        h.grounded().map_err(|e| e.to_string())?;
    }
    Ok(h)
}

fn point(p: Option<[f64; 2]>) -> Result<Option<Coordinate>, String> {
    p.map(|[x, y]| Coordinate::new(x, y).map_err(|e| e.to_string()))
        .transpose()
}

#[derive(Deserialize)]
struct OsGenesisWeb {
    id: String,
    instruction: String,
    url: String,
    screenshot: String,
    #[serde(default)]
    history: Vec<String>,
    #[serde(default)]
    thought: String,
    action: OsGenesisWebAction,
}

#[derive(Deserialize)]
struct OsGenesisWebAction {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    element: String,
    #[serde(default)]
    value: Option<Value>,
    #[serde(default)]
    point: Option<[f64; 2]>,
}

impl SourceRecord for OsGenesisWeb {
    fn convert(self) -> Result<StandardSample, String> {
        let a = self.action;
        let kind = kind_of(
            &a.kind,
            &[("input", ActionKind::Type), ("key_press", ActionKind::Press)],
        )?;
        let h = hint(Platform::Web, kind, &a.element, scalar(a.value), point(a.point)?, false)?;
        let step = GuiStep {
            goal: self.instruction,
            url: Some(self.url),
            history: self.history,
            thought: self.thought,
            action: h,
        };
        gui_sample(self.id, entry("os_genesis_web"), step, image(&self.screenshot))
    }
}

#[derive(Deserialize)]
struct OsGenesisMobile {
    id: String,
    instruction: String,
    screenshot: String,
    width: f64,
    height: f64,
    #[serde(default)]
    history: Vec<String>,
    #[serde(default)]
    thought: String,
    action: OsGenesisMobileAction,
}

#[derive(Deserialize)]
struct OsGenesisMobileAction {
    action_type: String,
    #[serde(default)]
    element: String,
    x: Option<f64>,
    y: Option<f64>,
    text: Option<String>,
    direction: Option<String>,
    app_name: Option<String>,
    goal_status: Option<String>,
    seconds: Option<f64>,
}

impl SourceRecord for OsGenesisMobile {
    fn convert(self) -> Result<StandardSample, String> {
        let a = self.action;
        let kind = kind_of(
            &a.action_type,
            &[
                ("navigate_back", ActionKind::GoBack),
                ("navigate_home", ActionKind::GoHome),
                ("input_text", ActionKind::Type),
                ("keyboard_enter", ActionKind::Enter),
                ("status", ActionKind::Stop),
            ],
        )?;
        let coord = match (a.x, a.y) {
            (Some(x), Some(y)) => {
                Some(Coordinate::from_pixels(x, y, self.width, self.height).map_err(|e| e.to_string())?)
            }
            _ => None,
        };
        let value = match kind {
            ActionKind::Type => a.text,
            ActionKind::Scroll => a.direction,
            ActionKind::OpenApp => a.app_name,
            ActionKind::Stop => a.goal_status,
            ActionKind::Wait => a.seconds.map(|s| s.to_string()),
            _ => None,
        };
        let h = hint(Platform::Mobile, kind, &a.element, value, coord, false)?;
        let step = GuiStep {
            goal: self.instruction,
            url: None,
            history: self.history,
            thought: self.thought,
            action: h,
        };
        gui_sample(self.id, entry("os_genesis_mobile"), step, image(&self.screenshot))
    }
}

#[derive(Deserialize)]
struct MindWeb {
    annotation_id: String,
    action_uid: String,
    confirmed_task: String,
    website: String,
    screenshot: String,
    viewport: [f64; 2],
    bbox: Option<[f64; 4]>,
    operation: MindWebOp,
    #[serde(default)]
    target_text: String,
    #[serde(default)]
    previous_actions: Vec<String>,
    #[serde(default)]
    thought: String,
}

#[derive(Deserialize)]
struct MindWebOp {
    op: String,
    #[serde(default)]
    value: String,
}

impl SourceRecord for MindWeb {
    fn convert(self) -> Result<StandardSample, String> {
        let op = &self.operation;
        let (kind, value) = match op.op.to_ascii_uppercase().as_str() {
            "CLICK" => (ActionKind::Click, None),
            "HOVER" => (ActionKind::Hover, None),
            "TYPE" => (ActionKind::Type, Some(op.value.clone())),
            "ENTER" => (ActionKind::Press, Some("Enter".to_string())),
            "SELECT" => return Err("SELECT has no counterpart in the web action space".into()),
            other => return Err(format!("unknown operation `{other}`")),
        };
        let [vw, vh] = self.viewport;
        let coord = self
            .bbox
            .map(|[x, y, w, h]| Coordinate::from_pixels(x + w / 2.0, y + h / 2.0, vw, vh))
            .transpose()
            .map_err(|e| e.to_string())?;
        let h = hint(Platform::Web, kind, &self.target_text, value, coord, false)?;
        let step = GuiStep {
            goal: self.confirmed_task,
            url: Some(self.website),
            history: self.previous_actions,
            thought: self.thought,
            action: h,
        };
        let id = format!("{}:{}", self.annotation_id, self.action_uid);
        gui_sample(id, entry("mm_mind2web"), step, image(&self.screenshot))
    }
}

#[derive(Deserialize)]
struct VwaStep {
    task_id: String,
    step: usize,
    intent: String,
    url: String,
    screenshot: String,
    #[serde(default)]
    element_description: String,
    action: String,
    #[serde(default)]
    thought: String,
    #[serde(default)]
    history: Vec<String>,
}

/// The payload of a grounded action in planner-value form.
pub fn grounded_value(a: &GroundedAction) -> Option<String> {
    match a.kind {
        ActionKind::Goto => a.url.clone(),
        ActionKind::PageFocus => a.tab_index.map(|t| t.to_string()),
        _ => a.value.clone(),
    }
}

impl SourceRecord for VwaStep {
    fn convert(self) -> Result<StandardSample, String> {
        let g = parse_grounded(&self.action, Platform::Web).map_err(|e| e.to_string())?;
        let h = hint(
            Platform::Web,
            g.kind,
            &self.element_description,
            grounded_value(&g),
            g.coord,
            false,
        )?;
        let step = GuiStep {
            goal: self.intent,
            url: Some(self.url),
            history: self.history,
            thought: self.thought,
            action: h,
        };
        let id = format!("{}:{}", self.task_id, self.step);
        gui_sample(id, entry("vwa_annotations"), step, image(&self.screenshot))
    }
}

fn default_mobile() -> Platform {
    Platform::Mobile
}

#[derive(Deserialize)]
struct Aguvis {
    id: String,
    image: String,
    #[serde(default = "default_mobile")]
    platform: Platform,
    #[serde(default)]
    history: Vec<String>,
    conversations: Vec<Turn>,
}

#[derive(Deserialize)]
struct Turn {
    from: String,
    value: String,
}

/// `name(k=v, ...)` with numeric or quoted values.
fn parse_call(code: &str) -> Result<(String, Vec<(String, String)>), String> {
    let code = code.trim();
    let open = code.find('(').ok_or_else(|| format!("not a call: `{code}`"))?;
    let inner = code[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| format!("unclosed call: `{code}`"))?;
    let mut args = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut parts = Vec::new();
    for c in inner.chars() {
        match (quote, c) {
            (Some(q), c) if c == q => {
                quote = None;
                cur.push(c);
            }
            (None, '\'' | '"') => {
                quote = Some(c);
                cur.push(c);
            }
            (None, ',') => parts.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        parts.push(cur);
    }
    for (i, p) in parts.iter().enumerate() {
        let (k, v) = match p.split_once('=') {
            Some((k, v)) if !k.contains(['\'', '"']) => (k.trim().to_string(), v.trim()),
            _ => (format!("_{i}"), p.trim()),
        };
        let v = v
            .strip_prefix(['\'', '"'])
            .and_then(|s| s.strip_suffix(['\'', '"']))
            .unwrap_or(v);
        args.push((k, v.to_string()));
    }
    Ok((code[..open].trim().to_string(), args))
}

impl SourceRecord for Aguvis {
    fn convert(self) -> Result<StandardSample, String> {
        let human = self
            .conversations
            .iter()
            .find(|t| t.from == "human")
            .ok_or("no human turn")?;
        let gpt = self
            .conversations
            .iter()
            .find(|t| t.from == "gpt")
            .ok_or("no gpt turn")?;
        let goal = human.value.replace("<image>", "").trim().to_string();
        let lines: Vec<&str> = gpt.value.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let (code, rest) = lines.split_last().ok_or("empty gpt turn")?;
        let mut desc = String::new();
        let mut thought = Vec::new();
        for l in rest {
            match l.strip_prefix("Action:") {
                Some(d) => desc = d.trim().to_string(),
                None => thought.push(l.strip_prefix("Thought:").unwrap_or(l).trim()),
            }
        }
        let (name, args) = parse_call(code)?;
        let arg = |k: &str| args.iter().find(|(a, _)| a == k || a == "_0").map(|(_, v)| v.clone());
        let num = |k: &str| -> Result<Option<f64>, String> {
            args.iter()
                .find(|(a, _)| a == k)
                .map(|(_, v)| v.parse::<f64>().map_err(|_| format!("`{k}` is not a number")))
                .transpose()
        };
        let coord = match (num("x")?, num("y")?) {
            (Some(x), Some(y)) => Some(Coordinate::new(x, y).map_err(|e| e.to_string())?),
            _ => None,
        };
        let func = name.rsplit('.').next().unwrap_or_default();
        let (kind, value) = match func {
            "click" => (ActionKind::Click, None),
            "long_press" => (ActionKind::LongPress, None),
            "write" => (ActionKind::Type, arg("message")),
            "swipe" => (ActionKind::Scroll, arg("direction")),
            "scroll" => {
                let page = num("page")?.unwrap_or(0.0);
                (
                    ActionKind::Scroll,
                    Some(if page < 0.0 { "down" } else { "up" }.to_string()),
                )
            }
            "press" if self.platform == Platform::Mobile => (ActionKind::Enter, None),
            "press" => (ActionKind::Press, arg("keys")),
            "home" => (ActionKind::GoHome, None),
            "back" => (ActionKind::GoBack, None),
            "open_app" => (ActionKind::OpenApp, arg("app_name")),
            "wait" => (ActionKind::Wait, Some(arg("seconds").unwrap_or_else(|| "1".into()))),
            "terminate" => (ActionKind::Stop, arg("status")),
            "answer" => (ActionKind::Stop, arg("text")),
            other => return Err(format!("unsupported call `{other}`")),
        };
        // typing targets the focused field, so a coordinate is optional there
        let h = hint(self.platform, kind, &desc, value, coord, kind == ActionKind::Type)?;
        let step = GuiStep {
            goal,
            url: None,
            history: self.history,
            thought: thought.join(" "),
            action: h,
        };
        gui_sample(self.id, entry("aguvis"), step, image(&self.image))
    }
}

#[derive(Deserialize)]
struct Instruct {
    id: String,
    source: String,
    #[serde(default)]
    domain: Option<String>,
    #[serde(default)]
    system: Option<String>,
    instruction: String,
    #[serde(default)]
    thought: Option<String>,
    answer: String,
    #[serde(default)]
    images: Vec<String>,
}

impl SourceRecord for Instruct {
    fn convert(self) -> Result<StandardSample, String> {
        let known = catalog::lookup(&self.source);
        let domain = self
            .domain
            .clone()
            .or_else(|| known.map(|e| e.domain.to_string()))
            .ok_or_else(|| format!("no domain for source `{}`", self.source))?;
        let modality = match known {
            Some(e) => e.modality,
            None if self.images.is_empty() => Modality::Language,
            None => Modality::VisionLanguage,
        };
        let thought = self.thought.filter(|t| !t.trim().is_empty());
        let mut messages = Vec::new();
        if let Some(s) = self.system {
            messages.push(ChatMessage {
                role: Role::System,
                content: vec![ContentPart::Text { text: s }],
            });
        }
        let mut content: Vec<ContentPart> = self
            .images
            .iter()
            .map(|p| ContentPart::Image { image: image(p) })
            .collect();
        content.push(ContentPart::Text { text: self.instruction });
        messages.push(ChatMessage {
            role: Role::User,
            content,
        });
        let reply = match &thought {
            Some(t) => format!("{}\n\n{}", t.trim(), self.answer),
            None => self.answer,
        };
        messages.push(ChatMessage::assistant_text(reply));
        let mut type_tags = vec![TypeTag::Instruction];
        if thought.is_some() {
            type_tags.push(TypeTag::Thought);
        }
        type_tags.push(TypeTag::Answer);
        Ok(StandardSample {
            id: self.id,
            domain,
            source: known.map(|e| e.dataset.to_string()).unwrap_or(self.source),
            modality,
            messages,
            type_tags,
            thought_optional: known.map(|e| e.thought_optional).unwrap_or(thought.is_none()),
            gui: None,
        })
    }
}

/// One post-training sample per step of a recorded trajectory.
pub fn samples_from_trajectory(
    traj: &Trajectory,
    id_prefix: &str,
    entry: &CatalogEntry,
) -> Result<Vec<StandardSample>, String> {
    let memory = traj.memory();
    traj.steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let coord = if s.high_level.needs_target(traj.platform) {
                s.grounded.coord
            } else {
                None
            };
            let step = GuiStep {
                goal: traj.goal.clone(),
                url: s.observation.url.clone(),
                history: memory[..i].to_vec(),
                thought: s.thought.clone(),
                action: HintAction::new(traj.platform, s.high_level.clone(), coord).map_err(|e| e.to_string())?,
            };
            gui_sample(
                format!("{id_prefix}:{i}"),
                entry,
                step,
                s.observation.screenshot.clone(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input() {
        for a in ADAPTERS {
            let r = ingest_str("", a, &IngestOptions::default()).unwrap();
            assert!(r.samples.is_empty() && r.rejects.is_empty(), "{a}");
        }
    }

    #[test]
    fn unknown_adapter() {
        assert!(matches!(
            ingest_str("", "nope", &IngestOptions::default()),
            Err(DatapipeError::UnknownAdapter(_))
        ));
    }

    #[test]
    fn schema_error_names_record() {
        let text =
            "{\"source\":\"MathInstruct\",\"id\":\"a\",\"instruction\":\"q\",\"answer\":\"1\"}\n{\"id\":\"b\"}\n";
        match ingest_str(text, "instruct", &IngestOptions::default()) {
            Err(DatapipeError::AdapterSchema { index, adapter, .. }) => {
                assert_eq!((index, adapter.as_str()), (1, "instruct"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn call_parsing() {
        let (n, a) = parse_call("pyautogui.write(message='a, b')").unwrap();
        assert_eq!(n, "pyautogui.write");
        assert_eq!(a, vec![("message".to_string(), "a, b".to_string())]);
        let (_, a) = parse_call("pyautogui.click(x=0.1, y=0.25)").unwrap();
        assert_eq!(a[1], ("y".to_string(), "0.25".to_string()));
    }
}
