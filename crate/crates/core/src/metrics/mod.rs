//! Success rate, progress rate and benchmark report tables.
//!
//! Progress of a task is the running maximum, over the episode, of the
//! fraction of satisfied subgoals. A task succeeds when its final subgoal
//! vector is all true. SR and PR are percentages over tasks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{TerminalStatus, Trajectory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("subgoal history is empty")]
    EmptyHistory,
    #[error("subgoal vectors must be non-empty and of equal length")]
    RaggedHistory,
    #[error("no task results to aggregate")]
    NoResults,
    #[error("report table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub success: bool,
    pub progress: f64,
    pub steps_used: usize,
    pub terminal_status: TerminalStatus,
}

fn fraction(v: &[bool]) -> f64 {
    v.iter().filter(|b| **b).count() as f64 / v.len() as f64
}

/// Running-max fraction of satisfied subgoals over a history of vectors.
pub fn task_progress(history: &[Vec<bool>]) -> Result<f64, MetricsError> {
    let first = history.first().ok_or(MetricsError::EmptyHistory)?;
    if first.is_empty() || history.iter().any(|v| v.len() != first.len()) {
        return Err(MetricsError::RaggedHistory);
    }
    Ok(history.iter().map(|v| fraction(v)).fold(0.0, f64::max))
}

impl TaskResult {
    pub fn from_trajectory(task_id: impl Into<String>, traj: &Trajectory) -> Result<Self, MetricsError> {
        let history = traj.subgoal_history();
        let progress = task_progress(&history)?;
        let success = traj.final_subgoals().iter().all(|b| *b);
        Ok(TaskResult {
            task_id: task_id.into(),
            success,
            progress,
            steps_used: traj.steps.len(),
            terminal_status: traj.terminal_status,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub benchmark: String,
    pub results: Vec<TaskResult>,
    /// Unrounded percentage.
    pub sr: f64,
    /// Unrounded percentage.
    pub pr: f64,
    pub config_digest: String,
}

/// Rounds a percentage to one decimal for display.
pub fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

impl BenchmarkReport {
    pub fn sr_display(&self) -> String {
        format!("{:.1}", self.sr)
    }

    pub fn pr_display(&self) -> String {
        format!("{:.1}", self.pr)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn aggregate(
    benchmark: impl Into<String>,
    results: Vec<TaskResult>,
    config_digest: impl Into<String>,
) -> Result<BenchmarkReport, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::NoResults);
    }
    let n = results.len() as f64;
    let sr = 100.0 * results.iter().filter(|r| r.success).count() as f64 / n;
    let pr = 100.0 * results.iter().map(|r| r.progress).sum::<f64>() / n;
    Ok(BenchmarkReport {
        benchmark: benchmark.into(),
        results,
        sr,
        pr,
        config_digest: config_digest.into(),
    })
}

/// One line of the domain comparison table. Missing cells render as `-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub domain: String,
    pub observation: String,
    pub webarena_pr: Option<f64>,
    pub webarena_sr: Option<f64>,
    pub androidworld_sr: Option<f64>,
}

impl ReportRow {
    /// A row from a web report and/or a mobile report.
    pub fn from_reports(
        domain: impl Into<String>,
        web: Option<&BenchmarkReport>,
        mobile: Option<&BenchmarkReport>,
    ) -> Self {
        ReportRow {
            domain: domain.into(),
            observation: "Image".into(),
            webarena_pr: web.map(|r| r.pr),
            webarena_sr: web.map(|r| r.sr),
            androidworld_sr: mobile.map(|r| r.sr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitedValue {
    pub value: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BaselineRecord {
    domain: String,
    observation: String,
    webarena_pr: Option<CitedValue>,
    webarena_sr: Option<CitedValue>,
    androidworld_sr: Option<CitedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BaselineFile {
    description: String,
    rows: Vec<BaselineRecord>,
}

pub const BASELINE_JSON: &str = include_str!("../../data/baseline_rows.json");

/// Bundled published reference rows, for side-by-side display only.
pub fn baseline_rows() -> Vec<ReportRow> {
    let file: BaselineFile = serde_json::from_str(BASELINE_JSON).expect("bundled baseline file parses");
    file.rows
        .into_iter()
        .map(|r| ReportRow {
            domain: r.domain,
            observation: r.observation,
            webarena_pr: r.webarena_pr.map(|c| c.value),
            webarena_sr: r.webarena_sr.map(|c| c.value),
            androidworld_sr: r.androidworld_sr.map(|c| c.value),
        })
        .collect()
}

const HEADER: [&str; 5] = ["Domain", "Observation", "WebArena PR", "WebArena SR", "AndroidWorld SR"];

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{:.1}", v)).unwrap_or_else(|| "-".into())
}

/// Markdown table: reference rows first, then result rows.
pub fn render_report(rows: &[ReportRow], baseline: &[ReportRow]) -> String {
    let mut out = format!("| {} |\n|---|---|---:|---:|---:|\n", HEADER.join(" | "));
    for r in baseline.iter().chain(rows) {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.domain.replace('|', "\\|"),
            r.observation.replace('|', "\\|"),
            cell(r.webarena_pr),
            cell(r.webarena_sr),
            cell(r.androidworld_sr)
        ));
    }
    out
}

fn split_row(line: &str) -> Vec<String> {
    let inner = line.trim().trim_start_matches('|');
    let inner = inner.strip_suffix('|').unwrap_or(inner);
    let mut cells = vec![String::new()];
    let mut chars = inner.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' if chars.peek() == Some(&'|') => {
                cells.last_mut().unwrap().push('|');
                chars.next();
            }
            '|' => cells.push(String::new()),
            c => cells.last_mut().unwrap().push(c),
        }
    }
    cells.into_iter().map(|c| c.trim().to_string()).collect()
}

fn parse_cell(s: &str) -> Result<Option<f64>, MetricsError> {
    match s {
        "-" | "--" | "" => Ok(None),
        s => s
            .parse()
            .map(Some)
            .map_err(|_| MetricsError::Table(format!("bad number `{s}`"))),
    }
}

/// Reads back a table produced by [`render_report`].
pub fn parse_report_table(md: &str) -> Result<Vec<ReportRow>, MetricsError> {
    let mut lines = md.lines().filter(|l| l.trim().starts_with('|'));
    let header = lines
        .next()
        .ok_or_else(|| MetricsError::Table("missing header".into()))?;
    if split_row(header) != HEADER {
        return Err(MetricsError::Table("unexpected header".into()));
    }
    lines.next();
    lines
        .map(|l| {
            let c = split_row(l);
            if c.len() != 5 {
                return Err(MetricsError::Table(format!("expected 5 cells, got {}", c.len())));
            }
            Ok(ReportRow {
                domain: c[0].clone(),
                observation: c[1].clone(),
                webarena_pr: parse_cell(&c[2])?,
                webarena_sr: parse_cell(&c[3])?,
                androidworld_sr: parse_cell(&c[4])?,
            })
        })
        .collect()
}
