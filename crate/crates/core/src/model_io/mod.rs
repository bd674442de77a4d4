//! Prompt construction, planner-output parsing and the planner/grounder
//! endpoint contracts.

mod endpoint;
#[cfg(feature = "http")]
pub mod http;
mod planner_output;
mod prompt;

use thiserror::Error;

use crate::actions::ActionError;

pub use endpoint::{
    call_grounder, call_planner, request_hash, DecodingParams, FnGrounder, FnPlanner, GrounderClient, GrounderRequest,
    GrounderResponse, PlannerClient, RetryPolicy, ScriptedGrounder, ScriptedPlanner,
};
pub use planner_output::{
    action_block, parse_planner_output, parse_planner_output_with, render_planner_reply, repair_json, ParseOptions,
    PlannerOutput,
};
pub use prompt::{
    build_planner_prompt, build_prompt_with_hint, format_memory, render_template, ChatMessage, ContentPart, ImageRef,
    Observation, PromptInputs, Role, TemplateId,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template {0} needs the current url")]
    MissingUrl(TemplateId),
    #[error("template {0} needs a hint action")]
    MissingHint(TemplateId),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerParseError {
    #[error("no action block found in planner output")]
    NoActionBlock,
    #[error("unknown action kind `{0}`")]
    BadActionKind(String),
    #[error(transparent)]
    InvalidAction(ActionError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EndpointError {
    #[error("endpoint unavailable after {attempts} attempt(s): {reason}")]
    EndpointUnavailable { attempts: u32, reason: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}
