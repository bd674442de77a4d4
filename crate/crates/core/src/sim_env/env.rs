use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use super::oracle::PlanStep;
use super::spec::{ScreenGraph, TaskInstance};
use super::state::{apply, evaluate_subgoals, hit_point, render_key, stop_answer, ApplyReport, Outcome, SimState};
use crate::actions::{ActionKind, Coordinate, GroundedAction, Platform};
use crate::episode::{Environment, EnvironmentFault, StepEffect};
use crate::model_io::{EndpointError, GrounderClient, GrounderRequest, GrounderResponse, ImageRef, Observation};

/// One live simulator instance for one task.
#[derive(Debug, Clone)]
pub struct SimEnv {
    graph: Arc<ScreenGraph>,
    task: TaskInstance,
    state: SimState,
    answer: Option<String>,
    step_index: usize,
    asset_dir: Option<PathBuf>,
    last_report: Option<ApplyReport>,
}

impl SimEnv {
    pub fn new(graph: Arc<ScreenGraph>, task: TaskInstance) -> Self {
        let state = SimState::initial(&graph, &task);
        SimEnv {
            graph,
            task,
            state,
            answer: None,
            step_index: 0,
            asset_dir: None,
            last_report: None,
        }
    }

    pub fn with_assets(mut self, dir: Option<PathBuf>) -> Self {
        self.asset_dir = dir;
        self
    }

    pub fn graph(&self) -> &Arc<ScreenGraph> {
        &self.graph
    }

    pub fn task(&self) -> &TaskInstance {
        &self.task
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn answer(&self) -> Option<&str> {
        self.answer.as_deref()
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn last_report(&self) -> Option<&ApplyReport> {
        self.last_report.as_ref()
    }

    /// Reinstates a saved state (used when resuming persisted sessions).
    pub fn restore(
        &mut self,
        state: SimState,
        answer: Option<String>,
        step_index: usize,
    ) -> Result<(), EnvironmentFault> {
        let known = state
            .tabs
            .iter()
            .all(|t| t.history.iter().all(|s| self.graph.screen(s).is_some()));
        if state.tabs.is_empty() || state.active >= state.tabs.len() || !known {
            return Err(EnvironmentFault("saved state does not match the screen graph".into()));
        }
        self.state = state;
        self.answer = answer;
        self.step_index = step_index;
        Ok(())
    }

    pub fn render_key(&self) -> String {
        render_key(&self.graph, &self.state)
    }

    /// Asset file for the current screenshot: exact key first, then the
    /// screen's generic image.
    pub fn screenshot_path(&self) -> Option<PathBuf> {
        let dir = self.asset_dir.as_deref()?;
        let key = self.render_key();
        let exact = dir.join(format!("{key}.png"));
        if exact.is_file() {
            return Some(exact);
        }
        let generic = dir.join(format!("{}.png", self.state.screen_id()));
        generic.is_file().then_some(generic)
    }

    pub fn url(&self) -> Option<String> {
        (self.graph.platform == Platform::Web).then(|| self.graph.url_of(self.state.screen(&self.graph)))
    }

    pub fn apply_action(&mut self, action: &GroundedAction) -> ApplyReport {
        let (next, report) = apply(&self.graph, &self.state, action);
        self.state = next;
        if action.kind == ActionKind::Stop {
            self.answer = stop_answer(action);
        }
        self.step_index += 1;
        self.last_report = Some(report.clone());
        report
    }
}

impl Environment for SimEnv {
    fn platform(&self) -> Platform {
        self.graph.platform
    }

    fn reset(&mut self) -> Result<(), EnvironmentFault> {
        self.state = SimState::initial(&self.graph, &self.task);
        self.answer = None;
        self.step_index = 0;
        self.last_report = None;
        Ok(())
    }

    fn observe(&self) -> Result<Observation, EnvironmentFault> {
        let key = self.render_key();
        let screenshot = match self.screenshot_path() {
            Some(p) => ImageRef::with_path(key, p.to_string_lossy()),
            None => ImageRef::new(key),
        };
        Ok(Observation {
            screenshot,
            url: self.url(),
            step_index: self.step_index,
        })
    }

    fn apply(&mut self, action: &GroundedAction) -> Result<StepEffect, EnvironmentFault> {
        if action.platform != self.graph.platform {
            return Err(EnvironmentFault(format!(
                "{} action sent to a {} environment",
                action.platform, self.graph.platform
            )));
        }
        let report = self.apply_action(action);
        let note = match &report.outcome {
            Outcome::Hit { element } => format!("hit {element}"),
            Outcome::Miss => "miss".into(),
            Outcome::Applied => "applied".into(),
            Outcome::NoOp { reason } => format!("no-op: {reason}"),
            Outcome::Stop => "stop".into(),
        };
        Ok(StepEffect {
            changed: report.changed,
            note,
            transition_prob: Some(1.0),
        })
    }

    fn subgoals(&self) -> Vec<bool> {
        evaluate_subgoals(&self.state, self.answer.as_deref(), &self.task)
    }

    fn state_digest(&self) -> String {
        let mut d = self.state.digest();
        if let Some(a) = &self.answer {
            d.push(':');
            d.push_str(a);
        }
        d
    }
}

/// Perfect grounder for the simulator: resolves an element label on the
/// screen named by the screenshot key.
#[derive(Debug, Clone)]
pub struct SimGrounder {
    graph: Arc<ScreenGraph>,
}

impl SimGrounder {
    pub fn new(graph: Arc<ScreenGraph>) -> Self {
        SimGrounder { graph }
    }

    pub fn locate(&self, screen_id: &str, label: &str) -> Option<Coordinate> {
        let screen = self.graph.screen(screen_id)?;
        let want = label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let el = screen.elements.iter().find(|e| e.label.to_lowercase() == want)?;
        (el.min_scroll..=screen.max_scroll)
            .find_map(|s| hit_point(screen, s, el))
            .and_then(|(x, y)| Coordinate::new(x, y).ok())
    }
}

impl GrounderClient for SimGrounder {
    fn ground(&self, req: &GrounderRequest) -> Result<GrounderResponse, EndpointError> {
        let screen = req.screenshot.key.split("__").next().unwrap_or_default();
        self.locate(screen, &req.element_description)
            .map(|coord| GrounderResponse { coord })
            .ok_or_else(|| {
                EndpointError::MalformedResponse(format!(
                    "no element {:?} on screen `{screen}`",
                    req.element_description
                ))
            })
    }
}

/// Planner replies that replay a plan; a trailing `stop [finish]` is
/// appended unless the plan already ends with a stop.
pub fn plan_replies(plan: &[PlanStep], finish: &str) -> Vec<String> {
    let mut out: Vec<String> = plan
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let a = &s.action;
            let value = match a.kind {
                ActionKind::Goto => a.url.clone(),
                ActionKind::PageFocus => a.tab_index.map(|t| t.to_string()),
                _ => a.value.clone(),
            };
            let block = json!({
                "Element Description": s.element.clone().unwrap_or_default(),
                "Action": a.kind.as_str(),
                "Value": value.unwrap_or_default(),
            });
            format!("Following the reference plan, step {}.\n```json\n{block:#}\n```", i + 1)
        })
        .collect();
    if plan.last().is_none_or(|s| s.action.kind != ActionKind::Stop) {
        let block = json!({ "Element Description": "", "Action": "stop", "Value": finish });
        out.push(format!("Nothing left to do.\n```json\n{block:#}\n```"));
    }
    out
}

pub fn asset_dir_of(pack_dir: &Path) -> Option<PathBuf> {
    let d = pack_dir.join("assets");
    d.is_dir().then_some(d)
}
