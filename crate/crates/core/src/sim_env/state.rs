use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::{Effect, Element, Predicate, Screen, ScreenGraph, TaskInstance};
use crate::actions::{ActionKind, GroundedAction, StopStatus};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tab {
    /// Navigation stack; the last entry is the current screen.
    pub history: Vec<String>,
    pub forward: Vec<String>,
    pub scroll: u32,
}

impl Tab {
    fn at(screen: &str) -> Self {
        Tab {
            history: vec![screen.to_string()],
            forward: Vec::new(),
            scroll: 0,
        }
    }

    pub fn current(&self) -> &str {
        self.history.last().map(String::as_str).unwrap_or_default()
    }
}

/// Mutable simulator state. The current screen is the top of the active tab.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimState {
    pub vars: BTreeMap<String, String>,
    pub tabs: Vec<Tab>,
    pub active: usize,
    pub visited: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    /// The action landed on an element.
    Hit {
        element: String,
    },
    /// A targeted action hit no element.
    Miss,
    /// Targetless action that took effect.
    Applied,
    /// Legal but ineffective here (e.g. `go_back` on an empty stack).
    NoOp {
        reason: String,
    },
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyReport {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub changed: bool,
}

impl SimState {
    pub fn initial(graph: &ScreenGraph, task: &TaskInstance) -> Self {
        let mut vars = graph.vars.clone();
        vars.extend(task.init_vars.iter().map(|(k, v)| (k.clone(), v.clone())));
        SimState {
            vars,
            tabs: vec![Tab::at(&task.initial_screen)],
            active: 0,
            visited: BTreeSet::from([task.initial_screen.clone()]),
        }
    }

    pub fn tab(&self) -> &Tab {
        &self.tabs[self.active]
    }

    fn tab_mut(&mut self) -> &mut Tab {
        &mut self.tabs[self.active]
    }

    pub fn screen_id(&self) -> &str {
        self.tab().current()
    }

    pub fn screen<'g>(&self, graph: &'g ScreenGraph) -> &'g Screen {
        graph.screen(self.screen_id()).expect("state refers to a loaded screen")
    }

    fn navigate(&mut self, screen: &str) {
        let tab = self.tab_mut();
        tab.history.push(screen.to_string());
        tab.forward.clear();
        tab.scroll = 0;
        self.visited.insert(screen.to_string());
    }

    fn run_effect(&mut self, effect: &Effect) {
        let before = self.vars.clone();
        for (k, v) in &effect.set {
            let value = match v.strip_prefix('$') {
                Some(src) => before.get(src).cloned().unwrap_or_default(),
                None => v.clone(),
            };
            self.vars.insert(k.clone(), value);
        }
        if let Some(g) = &effect.goto {
            self.navigate(g);
        }
    }

    /// Stable hex digest of the full state.
    pub fn digest(&self) -> String {
        let body = serde_json::to_vec(self).expect("state serializes");
        hex::encode(&Sha256::digest(body)[..16])
    }
}

/// Topmost visible element under a point; later elements are drawn on top.
pub fn hit_test(screen: &Screen, scroll: u32, x: f64, y: f64) -> Option<&Element> {
    screen
        .elements
        .iter()
        .rev()
        .find(|e| e.min_scroll <= scroll && e.contains(x, y))
}

/// A point (3-decimal grid) that hits `element` on `screen` at `scroll`,
/// trying the centre first.
pub fn hit_point(screen: &Screen, scroll: u32, element: &Element) -> Option<(f64, f64)> {
    if element.min_scroll > scroll {
        return None;
    }
    let round = |v: f64| (v * 1000.0).round() / 1000.0;
    let [x0, y0, x1, y1] = element.bbox;
    let (cx, cy) = element.center();
    let mut candidates = vec![(cx, cy)];
    for i in 1..=5 {
        for j in 1..=5 {
            candidates.push((x0 + (x1 - x0) * i as f64 / 6.0, y0 + (y1 - y0) * j as f64 / 6.0));
        }
    }
    candidates
        .into_iter()
        .map(|(x, y)| (round(x), round(y)))
        .find(|&(x, y)| hit_test(screen, scroll, x, y).is_some_and(|h| h.id == element.id))
}

fn noop(reason: impl Into<String>) -> ApplyReport {
    ApplyReport {
        outcome: Outcome::NoOp { reason: reason.into() },
        changed: false,
    }
}

/// The transition function. Pure in (state, action); interactions that do
/// nothing on a real GUI are reported no-ops rather than errors.
pub fn apply(graph: &ScreenGraph, state: &SimState, a: &GroundedAction) -> (SimState, ApplyReport) {
    let mut next = state.clone();
    let screen = state.screen(graph);
    let scroll = state.tab().scroll;
    let outcome = match a.kind {
        ActionKind::Click | ActionKind::LongPress | ActionKind::Hover | ActionKind::Type | ActionKind::Clear => {
            let Some(c) = a.coord else {
                return (next, noop("no coordinate"));
            };
            let Some(el) = hit_test(screen, scroll, c.x(), c.y()) else {
                return (
                    next,
                    ApplyReport {
                        outcome: Outcome::Miss,
                        changed: false,
                    },
                );
            };
            match a.kind {
                ActionKind::Click => el.on_click.as_ref().map(|e| next.run_effect(e)),
                ActionKind::LongPress => el.on_long_press.as_ref().map(|e| next.run_effect(e)),
                ActionKind::Hover => el.on_hover.as_ref().map(|e| next.run_effect(e)),
                ActionKind::Type => {
                    let Some(var) = &el.text_field else {
                        return (next, noop(format!("`{}` is not a text field", el.label)));
                    };
                    next.vars.insert(var.clone(), a.value.clone().unwrap_or_default());
                    el.on_type.as_ref().map(|e| next.run_effect(e))
                }
                _ => {
                    let Some(var) = &el.text_field else {
                        return (next, noop(format!("`{}` is not a text field", el.label)));
                    };
                    next.vars.insert(var.clone(), String::new());
                    None
                }
            };
            Outcome::Hit { element: el.id.clone() }
        }
        ActionKind::Scroll => {
            let tab = next.tab_mut();
            match a.value.as_deref() {
                Some("down") if tab.scroll < screen.max_scroll => tab.scroll += 1,
                Some("up") if tab.scroll > 0 => tab.scroll -= 1,
                _ => return (next, noop("cannot scroll further")),
            }
            Outcome::Applied
        }
        ActionKind::GoBack => {
            let tab = next.tab_mut();
            if tab.history.len() < 2 {
                return (next, noop("no previous screen"));
            }
            let cur = tab.history.pop().unwrap();
            tab.forward.push(cur);
            tab.scroll = 0;
            Outcome::Applied
        }
        ActionKind::GoForward => {
            let tab = next.tab_mut();
            let Some(s) = tab.forward.pop() else {
                return (next, noop("no next screen"));
            };
            tab.history.push(s.clone());
            tab.scroll = 0;
            next.visited.insert(s);
            Outcome::Applied
        }
        ActionKind::GoHome => {
            next.navigate(&graph.home_screen);
            Outcome::Applied
        }
        ActionKind::Enter | ActionKind::Press => {
            let submits = a.kind == ActionKind::Enter
                || a.value
                    .as_deref()
                    .is_some_and(|k| k.trim().eq_ignore_ascii_case("enter"));
            match (&screen.on_submit, submits) {
                (Some(e), true) => next.run_effect(e),
                _ => return (next, noop("nothing to submit")),
            }
            Outcome::Applied
        }
        ActionKind::OpenApp => {
            let Some(entry) = a.value.as_deref().and_then(|n| graph.app_entry(n)) else {
                return (next, noop("unknown app"));
            };
            next.navigate(entry);
            Outcome::Applied
        }
        ActionKind::Goto => {
            let target = a
                .url
                .as_deref()
                .and_then(|u| graph.screen_by_url(u))
                .filter(|s| s.addressable);
            let Some(target) = target else {
                return (next, noop("url not reachable"));
            };
            next.navigate(&target.id);
            Outcome::Applied
        }
        ActionKind::NewTab => {
            next.tabs.push(Tab::at(&graph.initial_screen));
            next.active = next.tabs.len() - 1;
            next.visited.insert(graph.initial_screen.clone());
            Outcome::Applied
        }
        ActionKind::PageFocus => {
            let i = a.tab_index.unwrap_or(0) as usize;
            if i >= next.tabs.len() {
                return (next, noop("no such tab"));
            }
            next.active = i;
            Outcome::Applied
        }
        ActionKind::CloseTab => {
            if next.tabs.len() < 2 {
                return (next, noop("cannot close the last tab"));
            }
            next.tabs.remove(next.active);
            next.active = next.active.min(next.tabs.len() - 1);
            Outcome::Applied
        }
        ActionKind::Wait => Outcome::Applied,
        ActionKind::Stop => Outcome::Stop,
    };
    let changed = next != *state;
    (next, ApplyReport { outcome, changed })
}

/// The answer a stop action emits, if it carries one.
pub fn stop_answer(a: &GroundedAction) -> Option<String> {
    match StopStatus::from_value(a.value.as_deref()?) {
        StopStatus::Answer(s) => Some(s),
        _ => None,
    }
}

fn norm(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub fn evaluate_predicate(p: &Predicate, state: &SimState, answer: Option<&str>) -> bool {
    match p {
        Predicate::VarEquals { var, value } => state.vars.get(var).is_some_and(|v| v.trim() == value.trim()),
        Predicate::VarContains { var, value } => state.vars.get(var).is_some_and(|v| norm(v).contains(&norm(value))),
        Predicate::OnScreen { screen } => state.screen_id() == screen,
        Predicate::Visited { screen } => state.visited.contains(screen),
        Predicate::AnswerEquals { value } => answer.is_some_and(|a| norm(a) == norm(value)),
    }
}

pub fn evaluate_subgoals(state: &SimState, answer: Option<&str>, task: &TaskInstance) -> Vec<bool> {
    task.subgoals
        .iter()
        .map(|p| evaluate_predicate(p, state, answer))
        .collect()
}

/// Screenshot key: screen id plus a digest of the variables it renders and the scroll offset.
pub fn render_key(graph: &ScreenGraph, state: &SimState) -> String {
    let screen = state.screen(graph);
    let mut h = Sha256::new();
    h.update(screen.id.as_bytes());
    for v in &screen.render_vars {
        h.update([0]);
        h.update(v.as_bytes());
        h.update([0]);
        h.update(state.vars.get(v).map(String::as_bytes).unwrap_or_default());
    }
    h.update(state.tab().scroll.to_le_bytes());
    format!("{}__{}", screen.id, &hex::encode(h.finalize())[..12])
}
