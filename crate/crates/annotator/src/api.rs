//! Routes and handlers.

use std::path::Path;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use guiagent_core::actions::{
    ground, parse_grounded, ActionError, ActionKind, Coordinate, HighLevelAction, StopStatus,
};
use guiagent_core::datapipe::catalog::CatalogEntry;
use guiagent_core::datapipe::{
    catalog, grounded_value, replay_verify_sim, samples_from_trajectory, write_samples_file,
};
use guiagent_core::episode::{write_trajectory_file, Author, Environment, Step, TerminalStatus};
use guiagent_core::metrics::task_progress;
use guiagent_core::model_io::{
    build_planner_prompt, call_planner, format_memory, parse_planner_output, DecodingParams, EndpointError, ImageRef,
    Observation, PlannerOutput, RetryPolicy, TemplateId,
};
use guiagent_core::sim_env::{Outcome, SimEnv};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::render::render_png;
use crate::session::{now_secs, Lookup, Mode, Session};
use crate::AppState;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/observation", get(observation))
        .route("/sessions/{id}/screenshot.png", get(screenshot))
        .route("/sessions/{id}/actions", post(submit_action))
        .route("/sessions/{id}/propose", post(propose))
        .route("/sessions/{id}/finalize", post(finalize))
        .with_state(state)
}

/// JSON error body shared by every endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Value>,
}

struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: error.into(),
                message: message.into(),
                diagnostics: None,
            },
        }
    }

    fn with(mut self, diagnostics: Value) -> Self {
        self.body.diagnostics = Some(diagnostics);
        self
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }

    fn invalid(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_action", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<Lookup> for ApiError {
    fn from(l: Lookup) -> Self {
        match l {
            Lookup::Unknown => ApiError::new(StatusCode::NOT_FOUND, "unknown_session", "no such session"),
            Lookup::Expired => ApiError::new(StatusCode::GONE, "session_expired", "session has expired"),
        }
    }
}

fn action_diagnostics(e: &ActionError) -> Value {
    match e {
        ActionError::Parse { offset, expected } => serde_json::json!({ "offset": offset, "expected": expected }),
        other => serde_json::json!({ "reason": other.to_string() }),
    }
}

fn json_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.to_string()).with(serde_json::json!({
            "line": e.line(),
            "column": e.column(),
        }))
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub task_id: String,
    /// Pack (environment) name; needed only when task ids collide.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pack: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    /// Selects the task's parameter table.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub pack: String,
    pub task_id: String,
    pub goal: String,
    pub platform: String,
    pub mode: Mode,
    pub created_at: u64,
    pub subgoals: Vec<bool>,
}

async fn create_session(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let req: CreateSession = json_body(&body)?;
    let hits: Vec<_> = app
        .packs
        .iter()
        .filter(|(name, _)| req.pack.as_deref().is_none_or(|p| p == name.as_str()))
        .filter_map(|(name, p)| p.tasks.iter().find(|t| t.id == req.task_id).map(|t| (name, p, t)))
        .collect();
    let (name, pack, spec) = match hits.as_slice() {
        [one] => *one,
        [] => {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_task",
                format!("no task `{}`", req.task_id),
            ))
        }
        _ => {
            let packs: Vec<&str> = hits.iter().map(|h| h.0.as_str()).collect();
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "ambiguous_task",
                format!("task `{}` exists in several packs; pass `pack`", req.task_id),
            )
            .with(serde_json::json!({ "packs": packs })));
        }
    };
    let task = spec.instantiate(&pack.graph, req.seed);
    let session = Session::new(uuid::Uuid::new_v4().to_string(), name, pack, task, req.mode, now_secs());
    let out = SessionCreated {
        session_id: session.id.clone(),
        pack: name.clone(),
        task_id: spec.id.clone(),
        goal: session.trajectory.goal.clone(),
        platform: session.trajectory.platform.to_string(),
        mode: session.mode,
        created_at: session.created_at,
        subgoals: session.env.subgoals(),
    };
    app.store.insert(session).map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(out)))
}

/// The current screenshot: the pack's asset when it has one, else a render.
fn screenshot_png(env: &SimEnv) -> Result<Vec<u8>, ApiError> {
    match env.screenshot_path() {
        Some(p) => std::fs::read(p).map_err(ApiError::internal),
        None => Ok(render_png(env.graph(), env.state())),
    }
}

fn progress(s: &Session) -> f64 {
    task_progress(&s.trajectory.subgoal_history()).unwrap_or(0.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationView {
    pub session_id: String,
    pub goal: String,
    pub platform: String,
    pub mode: Mode,
    pub step_index: usize,
    pub screenshot_key: String,
    pub screenshot_png_base64: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub subgoals: Vec<bool>,
    pub subgoal_progress: f64,
    /// Previous actions as they would appear in a planner prompt.
    pub history: String,
    pub sealed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_status: Option<TerminalStatus>,
}

async fn observation(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<ObservationView>, ApiError> {
    let handle = app.store.get(&id)?;
    let s = handle.lock().await;
    let png = screenshot_png(&s.env)?;
    Ok(Json(ObservationView {
        session_id: s.id.clone(),
        goal: s.trajectory.goal.clone(),
        platform: s.trajectory.platform.to_string(),
        mode: s.mode,
        step_index: s.env.step_index(),
        screenshot_key: s.env.render_key(),
        screenshot_png_base64: base64::engine::general_purpose::STANDARD.encode(png),
        url: s.env.url(),
        subgoals: s.env.subgoals(),
        subgoal_progress: progress(&s),
        history: format_memory(&s.trajectory.memory()),
        sealed: s.sealed,
        terminal_status: s.sealed.then_some(s.trajectory.terminal_status),
    }))
}

async fn screenshot(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let handle = app.store.get(&id)?;
    let png = screenshot_png(&handle.lock().await.env)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

/// A human action, either as canonical grounded text plus the element
/// description, or as a high-level action plus a coordinate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_level: Option<HighLevelAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord: Option<Coordinate>,
    /// Rationale; accepted only in steer mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionReceipt {
    pub step_index: usize,
    pub action: String,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub changed: bool,
    pub subgoals: Vec<bool>,
    pub progress: f64,
    pub state_digest: String,
    pub sealed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_status: Option<TerminalStatus>,
}

fn resolve_action(
    req: &ActionRequest,
    platform: guiagent_core::actions::Platform,
) -> Result<(HighLevelAction, guiagent_core::actions::GroundedAction), ApiError> {
    match (&req.action, &req.high_level) {
        (Some(text), None) => {
            if req.coord.is_some() {
                return Err(ApiError::invalid("`coord` goes with `high_level`, not `action`"));
            }
            let g = parse_grounded(text, platform)
                .map_err(|e| ApiError::invalid(e.to_string()).with(action_diagnostics(&e)))?;
            let desc = req.element_description.clone().unwrap_or_default();
            let hla = HighLevelAction::new(desc, g.kind, grounded_value(&g))
                .and_then(|h| h.validate(Some(platform)).map(|_| h))
                .map_err(|e| ApiError::invalid(e.to_string()).with(action_diagnostics(&e)))?;
            Ok((hla, g))
        }
        (None, Some(hla)) => {
            if req.element_description.is_some() {
                return Err(ApiError::invalid("put the element description inside `high_level`"));
            }
            let g = ground(hla, req.coord, platform)
                .map_err(|e| ApiError::invalid(e.to_string()).with(action_diagnostics(&e)))?;
            Ok((hla.clone(), g))
        }
        _ => Err(ApiError::invalid("send exactly one of `action` or `high_level`")),
    }
}

async fn submit_action(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<ActionReceipt>, ApiError> {
    let handle = app.store.get(&id)?;
    let req: ActionRequest = json_body(&body)?;
    let mut s = handle.lock().await;
    if s.sealed {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session_sealed",
            "the trajectory has already stopped",
        ));
    }
    if req.thought.is_some() && s.mode != Mode::Steer {
        return Err(ApiError::invalid("`thought` is accepted only in steer mode"));
    }
    let (hla, grounded) = resolve_action(&req, s.trajectory.platform)?;
    let observation = s.env.observe().map_err(ApiError::internal)?;
    let effect = s.env.apply(&grounded).map_err(|e| ApiError::invalid(e.to_string()))?;
    let report = s.env.last_report().cloned().expect("report after apply");
    let subgoals = s.env.subgoals();
    let digest = s.env.state_digest();
    s.trajectory.steps.push(Step {
        observation,
        thought: req.thought.clone().unwrap_or_default(),
        raw: String::new(),
        high_level: hla,
        grounded: grounded.clone(),
        subgoal_snapshot: subgoals.clone(),
        policy_prob: None,
        transition_prob: effect.transition_prob,
        post_state_digest: Some(digest.clone()),
        author: Author::Human,
    });
    if grounded.kind == ActionKind::Stop {
        let value = grounded.value.as_deref().unwrap_or_default();
        let status = StopStatus::from_value(value);
        s.trajectory.terminal_status = match status {
            StopStatus::Infeasible => TerminalStatus::Infeasible,
            _ => TerminalStatus::Completed,
        };
        s.trajectory.answer = match status {
            StopStatus::Answer(a) => Some(a),
            _ => None,
        };
        s.sealed = true;
    }
    app.store.save(&s).map_err(ApiError::internal)?;
    Ok(Json(ActionReceipt {
        step_index: s.trajectory.steps.len(),
        action: grounded.serialize(),
        outcome: report.outcome,
        changed: report.changed,
        subgoals,
        progress: progress(&s),
        state_digest: digest,
        sealed: s.sealed,
        terminal_status: s.sealed.then_some(s.trajectory.terminal_status),
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposeResponse {
    pub thought: String,
    pub action: HighLevelAction,
    pub raw: String,
}

impl From<PlannerOutput> for ProposeResponse {
    fn from(p: PlannerOutput) -> Self {
        ProposeResponse {
            thought: p.thought,
            action: p.action,
            raw: p.raw,
        }
    }
}

/// Writes the current screenshot where the planner can read it.
fn cache_screenshot(app: &AppState, env: &SimEnv) -> Result<ImageRef, ApiError> {
    let key = env.render_key();
    if let Some(p) = env.screenshot_path() {
        return Ok(ImageRef::with_path(key, p.to_string_lossy()));
    }
    let dir = app.export_dir.join(".screens");
    std::fs::create_dir_all(&dir).map_err(ApiError::internal)?;
    let path = dir.join(format!("{key}.png"));
    if !path.is_file() {
        std::fs::write(&path, render_png(env.graph(), env.state())).map_err(ApiError::internal)?;
    }
    Ok(ImageRef::with_path(key, path.to_string_lossy()))
}

async fn propose(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<ProposeResponse>, ApiError> {
    let handle = app.store.get(&id)?;
    let s = handle.lock().await;
    if s.mode != Mode::Steer {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_steer_mode",
            "proposals are available in steer mode only",
        ));
    }
    if s.sealed {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session_sealed",
            "the trajectory has already stopped",
        ));
    }
    let Some(planner) = app.planner.clone() else {
        return Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "no_planner",
            "no planner endpoint is configured",
        ));
    };
    let obs = Observation {
        screenshot: cache_screenshot(&app, &s.env)?,
        url: s.env.url(),
        step_index: s.env.step_index(),
    };
    let messages = build_planner_prompt(
        &s.trajectory.goal,
        &s.trajectory.memory(),
        &obs,
        TemplateId::eval_for(s.trajectory.platform),
    )
    .map_err(ApiError::internal)?;
    drop(s);
    let reply = tokio::task::spawn_blocking(move || {
        call_planner(
            planner.as_ref(),
            &messages,
            &DecodingParams::default(),
            &RetryPolicy::default(),
        )
    })
    .await
    .map_err(ApiError::internal)?;
    let text =
        reply.map_err(|e: EndpointError| ApiError::new(StatusCode::BAD_GATEWAY, "endpoint_error", e.to_string()))?;
    let out = parse_planner_output(&text).map_err(|e| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unparseable_proposal", e.to_string())
            .with(serde_json::json!({ "raw": text }))
    })?;
    Ok(Json(out.into()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalizeResponse {
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
    pub final_subgoals: Vec<bool>,
    pub steps_replayed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Exported samples file, present when the replay passed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub records: usize,
}

fn export_entry(platform: guiagent_core::actions::Platform) -> CatalogEntry {
    use guiagent_core::actions::Platform;
    match platform {
        Platform::Web => catalog::by_adapter("vwa_annotations")
            .expect("web catalog entry")
            .clone(),
        Platform::Mobile => CatalogEntry {
            dataset: "Annotations (Mobile)",
            adapter: None,
            ..catalog::by_adapter("os_genesis_mobile")
                .expect("mobile catalog entry")
                .clone()
        },
    }
}

/// Writes screenshots, the trajectory and its samples under `dir`.
fn export(s: &Session, dir: &Path) -> Result<(String, usize), ApiError> {
    let screens = dir.join("screens");
    std::fs::create_dir_all(&screens).map_err(ApiError::internal)?;
    let mut traj = s.trajectory.clone();
    let mut env = s.env.clone();
    env.reset().map_err(ApiError::internal)?;
    for step in traj.steps.iter_mut() {
        let key = env.render_key();
        let png = screenshot_png(&env)?;
        std::fs::write(screens.join(format!("{key}.png")), png).map_err(ApiError::internal)?;
        step.observation.screenshot = ImageRef::with_path(key.clone(), format!("screens/{key}.png"));
        env.apply(&step.grounded).map_err(ApiError::internal)?;
    }
    write_trajectory_file(&dir.join("trajectory.jsonl"), &traj).map_err(ApiError::internal)?;
    let samples = samples_from_trajectory(&traj, &s.id, &export_entry(traj.platform)).map_err(ApiError::internal)?;
    let file = dir.join("samples.jsonl");
    write_samples_file(&file, &samples).map_err(ApiError::internal)?;
    Ok((file.to_string_lossy().into_owned(), samples.len()))
}

async fn finalize(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<FinalizeResponse>, ApiError> {
    let handle = app.store.get(&id)?;
    let s = handle.lock().await;
    if !s.sealed {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_sealed",
            "finish the trajectory with a stop action first",
        ));
    }
    let report = replay_verify_sim(&s.trajectory, s.env.graph().clone(), s.env.task());
    let mut out = FinalizeResponse {
        pass: report.pass,
        diverged_at: report.diverged_at,
        final_subgoals: report.final_subgoals,
        steps_replayed: report.steps_replayed,
        error: report.error,
        file: None,
        records: 0,
    };
    if out.pass {
        let (file, records) = export(&s, &app.export_dir.join(&s.id))?;
        out.file = Some(file);
        out.records = records;
    }
    Ok(Json(out))
}
