//! Breadth-first oracle over the simulator state space.
//!
//! The search explores forward actions only (element interactions, scroll,
//! submit, app launch, url navigation, answers). Back/forward and tab
//! management are left out so that states can be merged without their
//! navigation stacks, which keeps the space small; plans therefore never
//! depend on history.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::spec::{Predicate, ScreenGraph, TaskInstance};
use super::state::{apply, evaluate_subgoals, hit_point, SimState};
use super::SimError;
use crate::actions::{ActionKind, Coordinate, GroundedAction, Platform};

pub const DEFAULT_NODE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub action: GroundedAction,
    /// Label of the element the action targets, when it has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub solvable: bool,
    /// Shortest all-subgoals plan when solvable, else a plan reaching `best_progress`.
    pub plan: Vec<PlanStep>,
    pub best_progress: f64,
    pub initial_progress: f64,
    pub nodes: usize,
}

fn fraction(v: &[bool]) -> f64 {
    v.iter().filter(|b| **b).count() as f64 / v.len() as f64
}

#[derive(PartialEq, Eq, Hash)]
struct Key {
    vars: BTreeMap<String, String>,
    screen: String,
    scroll: u32,
    visited: BTreeSet<String>,
    answer: Option<String>,
}

struct Node {
    state: SimState,
    answer: Option<String>,
    parent: Option<usize>,
    step: Option<PlanStep>,
    depth: usize,
}

struct Candidates {
    typed: Vec<String>,
    answers: Vec<String>,
    visited: BTreeSet<String>,
}

impl Candidates {
    fn of(task: &TaskInstance) -> Self {
        let mut typed = Vec::new();
        let mut answers = Vec::new();
        let mut visited = BTreeSet::new();
        for p in &task.subgoals {
            match p {
                Predicate::VarEquals { value, .. } | Predicate::VarContains { value, .. } => {
                    if !typed.contains(value) && !value.trim().is_empty() && !value.contains(['\n', '\r']) {
                        typed.push(value.clone());
                    }
                }
                Predicate::AnswerEquals { value } => {
                    if !answers.contains(value) {
                        answers.push(value.clone());
                    }
                }
                Predicate::Visited { screen } => {
                    visited.insert(screen.clone());
                }
                Predicate::OnScreen { .. } => {}
            }
        }
        Candidates {
            typed,
            answers,
            visited,
        }
    }
}

fn expansions(graph: &ScreenGraph, state: &SimState, cands: &Candidates) -> Vec<PlanStep> {
    let p = graph.platform;
    let screen = state.screen(graph);
    let scroll = state.tab().scroll;
    let mut out = Vec::new();
    let mut push = |kind: ActionKind, coord: Option<Coordinate>, value: Option<&str>, element: Option<&str>| {
        if let Ok(action) = GroundedAction::new(p, kind, coord, value) {
            out.push(PlanStep {
                action,
                element: element.map(str::to_string),
            });
        }
    };
    for el in &screen.elements {
        let Some((x, y)) = hit_point(screen, scroll, el) else {
            continue;
        };
        let c = Coordinate::new(x, y).ok();
        let label = Some(el.label.as_str());
        if el.on_click.is_some() {
            push(ActionKind::Click, c, None, label);
        }
        if el.on_long_press.is_some() && p == Platform::Mobile {
            push(ActionKind::LongPress, c, None, label);
        }
        if el.on_hover.is_some() && p == Platform::Web {
            push(ActionKind::Hover, c, None, label);
        }
        if el.text_field.is_some() {
            for t in &cands.typed {
                push(ActionKind::Type, c, Some(t), label);
            }
            if p == Platform::Web {
                push(ActionKind::Clear, c, None, label);
            }
        }
    }
    if scroll < screen.max_scroll {
        push(ActionKind::Scroll, None, Some("down"), None);
    }
    if scroll > 0 {
        push(ActionKind::Scroll, None, Some("up"), None);
    }
    if screen.on_submit.is_some() {
        match p {
            Platform::Mobile => push(ActionKind::Enter, None, None, None),
            Platform::Web => push(ActionKind::Press, None, Some("Enter"), None),
        }
    }
    match p {
        Platform::Mobile => {
            push(ActionKind::GoHome, None, None, None);
            for app in graph.apps.keys() {
                push(ActionKind::OpenApp, None, Some(app), None);
            }
        }
        Platform::Web => {
            for s in graph.screens().iter().filter(|s| s.addressable && s.id != screen.id) {
                push(ActionKind::Goto, None, Some(&graph.url_of(s)), None);
            }
        }
    }
    for a in &cands.answers {
        push(ActionKind::Stop, None, Some(a), None);
    }
    out
}

pub fn oracle_solve(graph: &ScreenGraph, task: &TaskInstance, max_steps: usize) -> Result<OracleResult, SimError> {
    oracle_solve_with_cap(graph, task, max_steps, DEFAULT_NODE_CAP)
}

pub fn oracle_solve_with_cap(
    graph: &ScreenGraph,
    task: &TaskInstance,
    max_steps: usize,
    node_cap: usize,
) -> Result<OracleResult, SimError> {
    let cands = Candidates::of(task);
    let key_of = |s: &SimState, answer: &Option<String>| Key {
        vars: s.vars.clone(),
        screen: s.screen_id().to_string(),
        scroll: s.tab().scroll,
        visited: s.visited.intersection(&cands.visited).cloned().collect(),
        answer: answer.clone(),
    };
    let start = SimState::initial(graph, task);
    let initial_progress = fraction(&evaluate_subgoals(&start, None, task));
    let mut seen: HashMap<Key, ()> = HashMap::new();
    seen.insert(key_of(&start, &None), ());
    let mut nodes = vec![Node {
        state: start,
        answer: None,
        parent: None,
        step: None,
        depth: 0,
    }];
    let mut best = (initial_progress, 0usize);
    let mut queue = VecDeque::from([0usize]);
    let mut goal = (initial_progress >= 1.0).then_some(0);

    while let (None, Some(idx)) = (goal, queue.pop_front()) {
        if nodes[idx].depth >= max_steps || nodes[idx].answer.is_some() {
            continue;
        }
        for step in expansions(graph, &nodes[idx].state, &cands) {
            let (state, _) = apply(graph, &nodes[idx].state, &step.action);
            let answer = match step.action.kind {
                ActionKind::Stop => step.action.value.clone(),
                _ => None,
            };
            if seen.insert(key_of(&state, &answer), ()).is_some() {
                continue;
            }
            let progress = fraction(&evaluate_subgoals(&state, answer.as_deref(), task));
            let depth = nodes[idx].depth + 1;
            nodes.push(Node {
                state,
                answer,
                parent: Some(idx),
                step: Some(step),
                depth,
            });
            if nodes.len() > node_cap {
                return Err(SimError::SearchBudgetExceeded { nodes: node_cap });
            }
            let id = nodes.len() - 1;
            if progress > best.0 {
                best = (progress, id);
            }
            if progress >= 1.0 {
                goal = Some(id);
                break;
            }
            queue.push_back(id);
        }
    }

    let end = goal.unwrap_or(best.1);
    let mut plan = Vec::new();
    let mut cur = end;
    while let Some(parent) = nodes[cur].parent {
        plan.push(nodes[cur].step.clone().expect("non-root nodes carry a step"));
        cur = parent;
    }
    plan.reverse();
    Ok(OracleResult {
        solvable: goal.is_some(),
        plan,
        best_progress: if goal.is_some() { 1.0 } else { best.0 },
        initial_progress,
        nodes: nodes.len(),
    })
}
