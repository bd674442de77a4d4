//! Thought generation for hinted trajectory steps, kept only when the
//! generated action agrees with the ground truth.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::adapters::gui_sample;
use super::catalog::{self, CatalogEntry};
use super::equiv::{actions_equivalent, DEFAULT_TOLERANCE};
use super::sample::{GuiStep, HintAction, StandardSample};
use super::DatapipeError;
use crate::actions::Platform;
use crate::model_io::{
    build_prompt_with_hint, call_grounder, call_planner, parse_planner_output, DecodingParams, EndpointError,
    GrounderClient, GrounderRequest, ImageRef, Observation, PlannerClient, RetryPolicy, TemplateId,
};

/// Phrases a thought must not contain; the prompts forbid mentioning the hint.
pub const HINT_LEAK_PHRASES: [&str; 2] = ["correct action hint", "hint answer"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotAugmentConfig {
    pub attempts: u32,
    /// Coordinate radius for the consistency check.
    pub tolerance: f64,
    /// Overrides the per-source prompt choice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<TemplateId>,
    pub decoding: DecodingParams,
    pub retry: RetryPolicy,
}

impl Default for CotAugmentConfig {
    fn default() -> Self {
        CotAugmentConfig {
            attempts: 5,
            tolerance: DEFAULT_TOLERANCE,
            template: None,
            decoding: DecodingParams::default(),
            retry: RetryPolicy::default(),
        }
    }
}

/// A trajectory step awaiting a generated thought.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotStep {
    pub id: String,
    /// Dataset name as listed in the catalog.
    pub source: String,
    pub goal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default)]
    pub history: Vec<String>,
    pub screenshot: ImageRef,
    pub hint: HintAction,
}

impl CotStep {
    /// The step behind a post-training sample, if it has one.
    pub fn from_sample(s: &StandardSample) -> Option<CotStep> {
        let gui = s.gui.as_ref()?;
        let screenshot = s.messages.iter().flat_map(|m| m.images()).next()?.clone();
        Some(CotStep {
            id: s.id.clone(),
            source: s.source.clone(),
            goal: gui.goal.clone(),
            url: gui.url.clone(),
            history: gui.history.clone(),
            screenshot,
            hint: gui.action.clone(),
        })
    }

    fn entry(&self) -> CatalogEntry {
        catalog::lookup(&self.source).cloned().unwrap_or(CatalogEntry {
            domain: match self.hint.platform {
                Platform::Web => "Web",
                Platform::Mobile => "Mobile",
            },
            dataset: "unlisted",
            ..catalog::POST_TRAINING[0].clone()
        })
    }
}

/// Prompt family for a source dataset.
pub fn template_for(source: &str, platform: Platform) -> TemplateId {
    match catalog::lookup(source).and_then(|e| e.adapter) {
        Some("mm_mind2web") => TemplateId::Mind2webCot,
        Some("vwa_annotations") => TemplateId::VwaCot,
        Some("os_genesis_web") => TemplateId::OsgenesisWebCot,
        _ => match platform {
            Platform::Web => TemplateId::OsgenesisWebCot,
            Platform::Mobile => TemplateId::OsgenesisMobileCot,
        },
    }
}

/// The hint as it is shown to the generator: the expected action block.
pub fn hint_text(h: &HintAction) -> String {
    json!({
        "Element Description": h.action.element_description,
        "Action": h.action.kind.as_str(),
        "Value": h.action.value.clone().unwrap_or_default(),
    })
    .to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotAttempt {
    pub raw: String,
    /// Why the attempt was not kept; `None` for the kept attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CotOutcome {
    Kept {
        sample: StandardSample,
        attempts: Vec<CotAttempt>,
    },
    Discarded {
        id: String,
        attempts: Vec<CotAttempt>,
    },
}

impl CotOutcome {
    pub fn attempts(&self) -> &[CotAttempt] {
        match self {
            CotOutcome::Kept { attempts, .. } | CotOutcome::Discarded { attempts, .. } => attempts,
        }
    }

    pub fn sample(&self) -> Option<&StandardSample> {
        match self {
            CotOutcome::Kept { sample, .. } => Some(sample),
            CotOutcome::Discarded { .. } => None,
        }
    }
}

/// Generates up to `cfg.attempts` thoughts and keeps the first whose action
/// agrees with the hint. With a grounder, the generated description is
/// located on the screenshot and compared by coordinate; without one,
/// descriptions are compared.
pub fn augment_cot(
    step: &CotStep,
    generator: &dyn PlannerClient,
    grounder: Option<&dyn GrounderClient>,
    cfg: &CotAugmentConfig,
) -> Result<CotOutcome, EndpointError> {
    let platform = step.hint.platform;
    let template = cfg.template.unwrap_or_else(|| template_for(&step.source, platform));
    let obs = Observation {
        screenshot: step.screenshot.clone(),
        url: match platform {
            Platform::Web => Some(step.url.clone().unwrap_or_default()),
            Platform::Mobile => step.url.clone(),
        },
        step_index: step.history.len(),
    };
    let hint = hint_text(&step.hint);
    let messages = build_prompt_with_hint(&step.goal, &step.history, &obs, template, Some(&hint))
        .map_err(|e| EndpointError::MalformedResponse(e.to_string()))?;
    let mut attempts = Vec::new();
    for _ in 0..cfg.attempts.max(1) {
        let raw = call_planner(generator, &messages, &cfg.decoding, &cfg.retry)?;
        let judged = judge(step, &raw, grounder, cfg);
        match judged {
            Ok(candidate) => {
                attempts.push(CotAttempt { raw, rejection: None });
                let entry = step.entry();
                let sample = gui_sample(step.id.clone(), &entry, candidate, step.screenshot.clone())
                    .map_err(EndpointError::MalformedResponse)?;
                return Ok(CotOutcome::Kept { sample, attempts });
            }
            Err(reason) => attempts.push(CotAttempt {
                raw,
                rejection: Some(reason),
            }),
        }
    }
    Ok(CotOutcome::Discarded {
        id: step.id.clone(),
        attempts,
    })
}

fn judge(
    step: &CotStep,
    raw: &str,
    grounder: Option<&dyn GrounderClient>,
    cfg: &CotAugmentConfig,
) -> Result<GuiStep, String> {
    let out = parse_planner_output(raw).map_err(|e| format!("unparseable: {e}"))?;
    let lower = out.thought.to_lowercase();
    if let Some(p) = HINT_LEAK_PHRASES.iter().find(|p| lower.contains(*p)) {
        return Err(format!("thought mentions the hint (`{p}`)"));
    }
    let platform = step.hint.platform;
    out.action.validate(Some(platform)).map_err(|e| e.to_string())?;
    let needs = out.action.needs_target(platform);
    let coord = match grounder {
        Some(g) if needs => {
            let req = GrounderRequest {
                element_description: out.action.element_description.clone(),
                screenshot: step.screenshot.clone(),
                platform,
            };
            Some(
                call_grounder(g, &req, &cfg.retry)
                    .map_err(|e| format!("grounding failed: {e}"))?
                    .coord,
            )
        }
        _ => None,
    };
    let candidate = HintAction {
        platform,
        action: out.action,
        coord,
    };
    if !actions_equivalent(&candidate, &step.hint, cfg.tolerance) {
        return Err("action disagrees with the hint".into());
    }
    // equal descriptions justified the match, so the hint's location applies
    let coord = if needs {
        candidate.coord.or(step.hint.coord)
    } else {
        None
    };
    Ok(GuiStep {
        goal: step.goal.clone(),
        url: step.url.clone(),
        history: step.history.clone(),
        thought: out.thought,
        action: HintAction { coord, ..candidate },
    })
}

/// Augments many steps; results keep input order.
pub fn augment_batch(
    steps: &[CotStep],
    generator: &dyn PlannerClient,
    grounder: Option<&dyn GrounderClient>,
    cfg: &CotAugmentConfig,
) -> Vec<Result<CotOutcome, EndpointError>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        steps
            .par_iter()
            .map(|s| augment_cot(s, generator, grounder, cfg))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        steps.iter().map(|s| augment_cot(s, generator, grounder, cfg)).collect()
    }
}

/// Writes one JSON line per discarded step with every raw attempt.
pub fn write_discard_log<W: Write>(mut w: W, outcomes: &[CotOutcome]) -> Result<usize, DatapipeError> {
    let mut n = 0;
    for o in outcomes {
        if let CotOutcome::Discarded { id, attempts } = o {
            serde_json::to_writer(&mut w, &json!({ "id": id, "attempts": attempts }))?;
            writeln!(w)?;
            n += 1;
        }
    }
    Ok(n)
}
