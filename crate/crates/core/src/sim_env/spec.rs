//! Environment and task pack files.
//!
//! A pack is a directory holding `env.toml` (the screen graph), `tasks.toml`
//! and an optional `assets/` folder of pre-rendered screenshots. The schema is
//! documented in `docs/task-pack.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SimError;
use crate::actions::Platform;

pub const PACK_FORMAT_VERSION: u32 = 1;

/// State mutation and/or screen transition triggered by an interaction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Effect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goto: Option<String>,
    /// Values starting with `$` copy another variable.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub set: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Element {
    pub id: String,
    /// Human-readable description; unique within its screen.
    pub label: String,
    /// `[x0, y0, x1, y1]`, normalized.
    pub bbox: [f64; 4],
    /// Element is only visible once the page is scrolled at least this far.
    #[serde(default)]
    pub min_scroll: u32,
    /// Variable receiving typed text; marks the element as a text field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_click: Option<Effect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_long_press: Option<Effect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_hover: Option<Effect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_type: Option<Effect>,
}

impl Element {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [x0, y0, x1, y1] = self.bbox;
        x0 <= x && x <= x1 && y0 <= y && y <= y1
    }

    pub fn center(&self) -> (f64, f64) {
        let [x0, y0, x1, y1] = self.bbox;
        ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Screen {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    /// Reachable by `goto` with its url.
    #[serde(default = "yes")]
    pub addressable: bool,
    #[serde(default)]
    pub max_scroll: u32,
    /// Variables whose values change the screenshot.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub render_vars: Vec<String>,
    /// Fired by `enter` (mobile) or `press [Enter]` (web).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_submit: Option<Effect>,
    #[serde(default)]
    pub elements: Vec<Element>,
}

/// On-disk form of `env.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvFile {
    pub version: u32,
    pub name: String,
    pub platform: Platform,
    pub initial_screen: String,
    /// Target of `go_home` (mobile); defaults to the initial screen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_screen: Option<String>,
    /// App name to entry screen, for `open_app`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub apps: BTreeMap<String, String>,
    /// State schema: every variable with its initial value.
    #[serde(default)]
    pub vars: BTreeMap<String, String>,
    pub screens: Vec<Screen>,
}

/// A validated screen graph. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenGraph {
    pub name: String,
    pub platform: Platform,
    pub initial_screen: String,
    pub home_screen: String,
    pub apps: BTreeMap<String, String>,
    pub vars: BTreeMap<String, String>,
    screens: Vec<Screen>,
    index: BTreeMap<String, usize>,
}

fn spec_err(location: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::Spec {
        location: location.into(),
        message: message.into(),
    }
}

fn toml_err(file: &str, src: &str, e: toml::de::Error) -> SimError {
    let location = match e.span() {
        Some(span) => {
            let before = &src[..span.start.min(src.len())];
            let line = before.matches('\n').count() + 1;
            let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("{file}:{line}:{col}")
        }
        None => file.to_string(),
    };
    spec_err(location, e.message().to_string())
}

fn check_effect(
    effect: &Effect,
    loc: &str,
    screens: &BTreeMap<String, usize>,
    vars: &BTreeMap<String, String>,
) -> Result<(), SimError> {
    if let Some(g) = &effect.goto {
        if !screens.contains_key(g) {
            return Err(spec_err(format!("{loc}.goto"), format!("unknown screen `{g}`")));
        }
    }
    for (k, v) in &effect.set {
        if !vars.contains_key(k) {
            return Err(spec_err(format!("{loc}.set.{k}"), format!("undeclared variable `{k}`")));
        }
        if let Some(src) = v.strip_prefix('$') {
            if !vars.contains_key(src) {
                return Err(spec_err(
                    format!("{loc}.set.{k}"),
                    format!("undeclared variable `{src}`"),
                ));
            }
        }
    }
    Ok(())
}

impl ScreenGraph {
    pub fn from_toml_str(src: &str) -> Result<Self, SimError> {
        let file: EnvFile = toml::from_str(src).map_err(|e| toml_err("env.toml", src, e))?;
        Self::from_file(file)
    }

    pub fn from_file(file: EnvFile) -> Result<Self, SimError> {
        if file.version != PACK_FORMAT_VERSION {
            return Err(spec_err(
                "env.toml:version",
                format!("unsupported version {} (expected {PACK_FORMAT_VERSION})", file.version),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, s) in file.screens.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(spec_err(
                    format!("screens[{i}].id"),
                    format!("duplicate screen `{}`", s.id),
                ));
            }
        }
        if !index.contains_key(&file.initial_screen) {
            return Err(spec_err(
                "initial_screen",
                format!("unknown screen `{}`", file.initial_screen),
            ));
        }
        let home_screen = file.home_screen.clone().unwrap_or_else(|| file.initial_screen.clone());
        if !index.contains_key(&home_screen) {
            return Err(spec_err("home_screen", format!("unknown screen `{home_screen}`")));
        }
        for (app, target) in &file.apps {
            if !index.contains_key(target) {
                return Err(spec_err(format!("apps.{app}"), format!("unknown screen `{target}`")));
            }
        }
        let mut urls = BTreeSet::new();
        for (i, s) in file.screens.iter().enumerate() {
            let sl = format!("screens[{i}]");
            if let Some(u) = &s.url {
                if !urls.insert(u.clone()) {
                    return Err(spec_err(format!("{sl}.url"), format!("duplicate url `{u}`")));
                }
            }
            for v in &s.render_vars {
                if !file.vars.contains_key(v) {
                    return Err(spec_err(
                        format!("{sl}.render_vars"),
                        format!("undeclared variable `{v}`"),
                    ));
                }
            }
            if let Some(e) = &s.on_submit {
                check_effect(e, &format!("{sl}.on_submit"), &index, &file.vars)?;
            }
            let mut ids = BTreeSet::new();
            let mut labels = BTreeSet::new();
            for (j, el) in s.elements.iter().enumerate() {
                let el_loc = format!("{sl}.elements[{j}]");
                if !ids.insert(el.id.as_str()) {
                    return Err(spec_err(
                        format!("{el_loc}.id"),
                        format!("duplicate element `{}`", el.id),
                    ));
                }
                if !labels.insert(el.label.trim().to_lowercase()) {
                    return Err(spec_err(
                        format!("{el_loc}.label"),
                        format!("duplicate label `{}`", el.label),
                    ));
                }
                if el.label.trim().is_empty() {
                    return Err(spec_err(format!("{el_loc}.label"), "empty label"));
                }
                let [x0, y0, x1, y1] = el.bbox;
                let in_unit = el.bbox.iter().all(|v| (0.0..=1.0).contains(v));
                if !in_unit || x0 >= x1 || y0 >= y1 {
                    return Err(spec_err(
                        format!("{el_loc}.bbox"),
                        "bbox must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1",
                    ));
                }
                if el.min_scroll > s.max_scroll {
                    return Err(spec_err(
                        format!("{el_loc}.min_scroll"),
                        "exceeds the screen's max_scroll",
                    ));
                }
                if let Some(v) = &el.text_field {
                    if !file.vars.contains_key(v) {
                        return Err(spec_err(
                            format!("{el_loc}.text_field"),
                            format!("undeclared variable `{v}`"),
                        ));
                    }
                } else if el.on_type.is_some() {
                    return Err(spec_err(format!("{el_loc}.on_type"), "type effects need a text_field"));
                }
                for (name, eff) in [
                    ("on_click", &el.on_click),
                    ("on_long_press", &el.on_long_press),
                    ("on_hover", &el.on_hover),
                    ("on_type", &el.on_type),
                ] {
                    if let Some(e) = eff {
                        check_effect(e, &format!("{el_loc}.{name}"), &index, &file.vars)?;
                    }
                }
            }
        }
        Ok(ScreenGraph {
            name: file.name,
            platform: file.platform,
            initial_screen: file.initial_screen,
            home_screen,
            apps: file.apps,
            vars: file.vars,
            screens: file.screens,
            index,
        })
    }

    pub fn to_file(&self) -> EnvFile {
        EnvFile {
            version: PACK_FORMAT_VERSION,
            name: self.name.clone(),
            platform: self.platform,
            initial_screen: self.initial_screen.clone(),
            home_screen: Some(self.home_screen.clone()),
            apps: self.apps.clone(),
            vars: self.vars.clone(),
            screens: self.screens.clone(),
        }
    }

    pub fn screens(&self) -> &[Screen] {
        &self.screens
    }

    pub fn screen(&self, id: &str) -> Option<&Screen> {
        self.index.get(id).map(|&i| &self.screens[i])
    }

    /// The url shown for a screen; screens without one get a synthetic url.
    pub fn url_of(&self, screen: &Screen) -> String {
        screen
            .url
            .clone()
            .unwrap_or_else(|| format!("sim://{}/{}", self.name, screen.id))
    }

    pub fn screen_by_url(&self, url: &str) -> Option<&Screen> {
        let url = url.trim();
        self.screens
            .iter()
            .find(|s| self.url_of(s) == url || self.url_of(s).trim_end_matches('/') == url.trim_end_matches('/'))
    }

    pub fn app_entry(&self, name: &str) -> Option<&str> {
        let name = name.trim();
        self.apps
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// One subgoal test over (state, current screen, emitted answer).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Predicate {
    VarEquals { var: String, value: String },
    VarContains { var: String, value: String },
    OnScreen { screen: String },
    Visited { screen: String },
    AnswerEquals { value: String },
}

impl Predicate {
    fn map_text(&self, f: impl Fn(&str) -> String) -> Predicate {
        match self {
            Predicate::VarEquals { var, value } => Predicate::VarEquals {
                var: f(var),
                value: f(value),
            },
            Predicate::VarContains { var, value } => Predicate::VarContains {
                var: f(var),
                value: f(value),
            },
            Predicate::OnScreen { screen } => Predicate::OnScreen { screen: f(screen) },
            Predicate::Visited { screen } => Predicate::Visited { screen: f(screen) },
            Predicate::AnswerEquals { value } => Predicate::AnswerEquals { value: f(value) },
        }
    }
}

/// Task template as written in `tasks.toml`. `{name}` placeholders in the
/// goal, subgoals and initial variables are filled from one `params` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub goal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<Platform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_screen: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub init_vars: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<BTreeMap<String, String>>,
    pub subgoals: Vec<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub version: u32,
    pub tasks: Vec<TaskSpec>,
}

/// A task with its parameters chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub goal: String,
    pub platform: Platform,
    pub initial_screen: String,
    pub init_vars: BTreeMap<String, String>,
    pub subgoals: Vec<Predicate>,
    pub param_index: Option<usize>,
}

fn fill(template: &str, params: &BTreeMap<String, String>) -> String {
    let mut out = template.to_string();
    for (k, v) in params {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn unresolved(s: &str) -> Option<&str> {
    let start = s.find('{')?;
    let end = s[start..].find('}')?;
    let name = &s[start + 1..start + end];
    (!name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_')).then_some(name)
}

impl TaskSpec {
    /// Picks a parameter table from the seed (stable across runs and platforms).
    pub fn param_index(&self, seed: u64) -> Option<usize> {
        if self.params.is_empty() {
            return None;
        }
        let h = Sha256::digest(format!("{seed}:{}", self.id));
        let n = u64::from_le_bytes(h[..8].try_into().unwrap());
        Some((n % self.params.len() as u64) as usize)
    }

    pub fn instantiate_with(&self, graph: &ScreenGraph, index: Option<usize>) -> TaskInstance {
        let empty = BTreeMap::new();
        let params = index.and_then(|i| self.params.get(i)).unwrap_or(&empty);
        TaskInstance {
            id: self.id.clone(),
            goal: fill(&self.goal, params),
            platform: self.platform.unwrap_or(graph.platform),
            initial_screen: self
                .initial_screen
                .as_deref()
                .map(|s| fill(s, params))
                .unwrap_or_else(|| graph.initial_screen.clone()),
            init_vars: self
                .init_vars
                .iter()
                .map(|(k, v)| (k.clone(), fill(v, params)))
                .collect(),
            subgoals: self.subgoals.iter().map(|p| p.map_text(|t| fill(t, params))).collect(),
            param_index: index,
        }
    }

    pub fn instantiate(&self, graph: &ScreenGraph, seed: u64) -> TaskInstance {
        self.instantiate_with(graph, self.param_index(seed))
    }

    fn validate(&self, i: usize, graph: &ScreenGraph) -> Result<(), SimError> {
        let loc = format!("tasks[{i}]");
        if self.subgoals.is_empty() {
            return Err(spec_err(format!("{loc}.subgoals"), "a task needs at least one subgoal"));
        }
        let choices: Vec<Option<usize>> = if self.params.is_empty() {
            vec![None]
        } else {
            (0..self.params.len()).map(Some).collect()
        };
        for choice in choices {
            let inst = self.instantiate_with(graph, choice);
            let ploc = match choice {
                Some(p) => format!("{loc} (params[{p}])"),
                None => loc.clone(),
            };
            if inst.platform != graph.platform {
                return Err(spec_err(
                    format!("{ploc}.platform"),
                    "task platform differs from the environment",
                ));
            }
            let mut texts = vec![inst.goal.as_str(), inst.initial_screen.as_str()];
            texts.extend(inst.init_vars.values().map(String::as_str));
            if graph.screen(&inst.initial_screen).is_none() {
                return Err(spec_err(
                    format!("{ploc}.initial_screen"),
                    format!("unknown screen `{}`", inst.initial_screen),
                ));
            }
            for k in inst.init_vars.keys() {
                if !graph.vars.contains_key(k) {
                    return Err(spec_err(
                        format!("{ploc}.init_vars.{k}"),
                        format!("undeclared variable `{k}`"),
                    ));
                }
            }
            for (j, p) in inst.subgoals.iter().enumerate() {
                let sloc = format!("{ploc}.subgoals[{j}]");
                match p {
                    Predicate::VarEquals { var, value } | Predicate::VarContains { var, value } => {
                        if !graph.vars.contains_key(var) {
                            return Err(spec_err(sloc, format!("undeclared variable `{var}`")));
                        }
                        texts.push(value);
                    }
                    Predicate::OnScreen { screen } | Predicate::Visited { screen } => {
                        if graph.screen(screen).is_none() {
                            return Err(spec_err(sloc, format!("unknown screen `{screen}`")));
                        }
                    }
                    Predicate::AnswerEquals { value } => texts.push(value),
                }
            }
            if let Some(name) = texts.iter().find_map(|t| unresolved(t)) {
                return Err(spec_err(ploc, format!("unresolved placeholder `{{{name}}}`")));
            }
        }
        Ok(())
    }
}

/// Parses and validates `tasks.toml` against a loaded graph.
pub fn tasks_from_toml_str(src: &str, graph: &ScreenGraph) -> Result<Vec<TaskSpec>, SimError> {
    let file: TaskFile = toml::from_str(src).map_err(|e| toml_err("tasks.toml", src, e))?;
    validate_tasks(file, graph)
}

pub fn validate_tasks(file: TaskFile, graph: &ScreenGraph) -> Result<Vec<TaskSpec>, SimError> {
    if file.version != PACK_FORMAT_VERSION {
        return Err(spec_err(
            "tasks.toml:version",
            format!("unsupported version {} (expected {PACK_FORMAT_VERSION})", file.version),
        ));
    }
    let mut ids = BTreeSet::new();
    for (i, t) in file.tasks.iter().enumerate() {
        if !ids.insert(t.id.as_str()) {
            return Err(spec_err(format!("tasks[{i}].id"), format!("duplicate task `{}`", t.id)));
        }
        t.validate(i, graph)?;
    }
    Ok(file.tasks)
}

/// A loaded environment plus its tasks.
#[derive(Debug, Clone)]
pub struct TaskPack {
    pub graph: ScreenGraph,
    pub tasks: Vec<TaskSpec>,
    pub asset_dir: Option<PathBuf>,
}

impl TaskPack {
    pub fn from_strs(env_src: &str, tasks_src: &str) -> Result<Self, SimError> {
        let graph = ScreenGraph::from_toml_str(env_src)?;
        let tasks = tasks_from_toml_str(tasks_src, &graph)?;
        Ok(TaskPack {
            graph,
            tasks,
            asset_dir: None,
        })
    }

    pub fn load_dir(dir: &Path) -> Result<Self, SimError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| spec_err(dir.join(name).display().to_string(), e.to_string()))
        };
        let mut pack = Self::from_strs(&read("env.toml")?, &read("tasks.toml")?)?;
        let assets = dir.join("assets");
        if assets.is_dir() {
            pack.asset_dir = Some(assets);
        }
        Ok(pack)
    }

    pub fn task(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), SimError> {
        let io = |e: std::io::Error| spec_err(dir.display().to_string(), e.to_string());
        std::fs::create_dir_all(dir).map_err(io)?;
        let env = toml::to_string_pretty(&self.graph.to_file()).map_err(|e| spec_err("env.toml", e.to_string()))?;
        let tasks = toml::to_string_pretty(&TaskFile {
            version: PACK_FORMAT_VERSION,
            tasks: self.tasks.clone(),
        })
        .map_err(|e| spec_err("tasks.toml", e.to_string()))?;
        std::fs::write(dir.join("env.toml"), env).map_err(io)?;
        std::fs::write(dir.join("tasks.toml"), tasks).map_err(io)?;
        Ok(())
    }
}
