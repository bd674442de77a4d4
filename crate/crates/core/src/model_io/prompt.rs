//! Planner and chain-of-thought prompt templates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::actions::Platform;

/// Reference to a screenshot: a stable key plus an optional file location.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl ImageRef {
    pub fn new(key: impl Into<String>) -> Self {
        ImageRef {
            key: key.into(),
            path: None,
        }
    }

    pub fn with_path(key: impl Into<String>, path: impl Into<String>) -> Self {
        ImageRef {
            key: key.into(),
            path: Some(path.into()),
        }
    }
}

/// What the agent sees at one step: a screenshot plus, on the web, the URL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub screenshot: ImageRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    MobileEval,
    WebEval,
    OsgenesisMobileCot,
    OsgenesisWebCot,
    VwaCot,
    Mind2webCot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Intent,
    PreviousActions,
    Url,
    Hint,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::MobileEval,
        TemplateId::WebEval,
        TemplateId::OsgenesisMobileCot,
        TemplateId::OsgenesisWebCot,
        TemplateId::VwaCot,
        TemplateId::Mind2webCot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::MobileEval => "mobile_eval",
            TemplateId::WebEval => "web_eval",
            TemplateId::OsgenesisMobileCot => "osgenesis_mobile_cot",
            TemplateId::OsgenesisWebCot => "osgenesis_web_cot",
            TemplateId::VwaCot => "vwa_cot",
            TemplateId::Mind2webCot => "mind2web_cot",
        }
    }

    pub fn body(self) -> &'static str {
        match self {
            TemplateId::MobileEval => include_str!("../../templates/mobile_eval.txt"),
            TemplateId::WebEval => include_str!("../../templates/web_eval.txt"),
            TemplateId::OsgenesisMobileCot => include_str!("../../templates/osgenesis_mobile_cot.txt"),
            TemplateId::OsgenesisWebCot => include_str!("../../templates/osgenesis_web_cot.txt"),
            TemplateId::VwaCot => include_str!("../../templates/vwa_cot.txt"),
            TemplateId::Mind2webCot => include_str!("../../templates/mind2web_cot.txt"),
        }
    }

    /// Placeholder tokens exactly as they appear in the body.
    fn slots(self) -> &'static [(&'static str, Slot)] {
        match self {
            TemplateId::MobileEval => &[
                ("{previous_actions}", Slot::PreviousActions),
                ("{intent}", Slot::Intent),
            ],
            TemplateId::WebEval => &[
                ("{url}", Slot::Url),
                ("{previous_actions}", Slot::PreviousActions),
                ("{intent}", Slot::Intent),
            ],
            TemplateId::OsgenesisMobileCot | TemplateId::OsgenesisWebCot => &[
                ("{previous_actions}", Slot::PreviousActions),
                ("{intent}", Slot::Intent),
                ("{correct_answer}", Slot::Hint),
            ],
            TemplateId::VwaCot => &[
                ("{url}", Slot::Url),
                ("{previous_actions}", Slot::PreviousActions),
                ("{intent}", Slot::Intent),
                ("{hint_action}", Slot::Hint),
            ],
            TemplateId::Mind2webCot => &[
                ("{task}", Slot::Intent),
                ("{previous actions}", Slot::PreviousActions),
                ("{hint_answer}", Slot::Hint),
            ],
        }
    }

    pub fn placeholders(self) -> impl Iterator<Item = &'static str> {
        self.slots().iter().map(|(tok, _)| *tok)
    }

    pub fn requires_url(self) -> bool {
        self.slots().iter().any(|(_, s)| *s == Slot::Url)
    }

    pub fn requires_hint(self) -> bool {
        self.slots().iter().any(|(_, s)| *s == Slot::Hint)
    }

    pub fn eval_for(platform: Platform) -> TemplateId {
        match platform {
            Platform::Mobile => TemplateId::MobileEval,
            Platform::Web => TemplateId::WebEval,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

/// Values substituted into a template.
#[derive(Debug, Clone, Default)]
pub struct PromptInputs<'a> {
    pub intent: &'a str,
    pub previous_actions: &'a str,
    pub url: Option<&'a str>,
    pub hint: Option<&'a str>,
}

/// Substitutes every placeholder site of the template in one left-to-right
/// pass, so substituted text is never rescanned.
pub fn render_template(template: TemplateId, inputs: &PromptInputs<'_>) -> Result<String, PromptError> {
    let url = match (template.requires_url(), inputs.url) {
        (true, None) => return Err(PromptError::MissingUrl(template)),
        (_, u) => u.unwrap_or_default(),
    };
    let hint = match (template.requires_hint(), inputs.hint) {
        (true, None) => return Err(PromptError::MissingHint(template)),
        (_, h) => h.unwrap_or_default(),
    };
    let slots = template.slots();
    let body = template.body();
    let mut out = String::with_capacity(body.len() + 256);
    let mut rest = body;
    loop {
        let next = slots
            .iter()
            .filter_map(|(tok, slot)| rest.find(tok).map(|i| (i, *tok, *slot)))
            .min_by_key(|(i, _, _)| *i);
        let Some((i, tok, slot)) = next else {
            out.push_str(rest);
            break;
        };
        out.push_str(&rest[..i]);
        out.push_str(match slot {
            Slot::Intent => inputs.intent,
            Slot::PreviousActions => inputs.previous_actions,
            Slot::Url => url,
            Slot::Hint => hint,
        });
        rest = &rest[i + tok.len()..];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    Image { image: ImageRef },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn user_text(text: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: vec![ContentPart::Text { text: text.into() }],
        }
    }

    pub fn assistant_text(text: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: vec![ContentPart::Text { text: text.into() }],
        }
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageRef> {
        self.content.iter().filter_map(|p| match p {
            ContentPart::Image { image } => Some(image),
            ContentPart::Text { .. } => None,
        })
    }

    pub fn text(&self) -> String {
        self.content
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text { text } => Some(text.as_str()),
                ContentPart::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("")
    }
}

/// Renders `step i: ...` memory from prior high-level action summaries.
pub fn format_memory<S: AsRef<str>>(history: &[S]) -> String {
    if history.is_empty() {
        return "None".to_string();
    }
    history
        .iter()
        .enumerate()
        .map(|(i, s)| format!("step {}: {}", i + 1, s.as_ref()))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Builds the planner request: one user message holding the screenshot and
/// the rendered template text.
pub fn build_planner_prompt<S: AsRef<str>>(
    goal: &str,
    memory: &[S],
    obs: &Observation,
    template: TemplateId,
) -> Result<Vec<ChatMessage>, PromptError> {
    build_prompt_with_hint(goal, memory, obs, template, None)
}

pub fn build_prompt_with_hint<S: AsRef<str>>(
    goal: &str,
    memory: &[S],
    obs: &Observation,
    template: TemplateId,
    hint: Option<&str>,
) -> Result<Vec<ChatMessage>, PromptError> {
    let previous = format_memory(memory);
    let text = render_template(
        template,
        &PromptInputs {
            intent: goal,
            previous_actions: &previous,
            url: obs.url.as_deref(),
            hint,
        },
    )?;
    Ok(vec![ChatMessage {
        role: Role::User,
        content: vec![
            ContentPart::Image {
                image: obs.screenshot.clone(),
            },
            ContentPart::Text { text },
        ],
    }])
}
