//! JSON-lines trajectory files: one header line, then one line per step.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PersistError, Step, StepFailure, TerminalStatus, Trajectory};
use crate::actions::Platform;

pub const TRAJECTORY_FORMAT: &str = "guiagent.trajectory";
pub const TRAJECTORY_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    goal: String,
    platform: Platform,
    task_id: Option<String>,
    initial_subgoals: Vec<bool>,
    terminal_status: TerminalStatus,
    answer: Option<String>,
    failures: Vec<StepFailure>,
    steps: usize,
}

#[derive(Deserialize)]
struct VersionProbe {
    format: Option<String>,
    version: Option<u32>,
}

pub fn persist_trajectory(traj: &Trajectory) -> String {
    let header = Header {
        format: TRAJECTORY_FORMAT.into(),
        version: TRAJECTORY_VERSION,
        goal: traj.goal.clone(),
        platform: traj.platform,
        task_id: traj.task_id.clone(),
        initial_subgoals: traj.initial_subgoals.clone(),
        terminal_status: traj.terminal_status,
        answer: traj.answer.clone(),
        failures: traj.failures.clone(),
        steps: traj.steps.len(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for s in &traj.steps {
        out.push_str(&serde_json::to_string(s).expect("step serializes"));
        out.push('\n');
    }
    out
}

pub fn load_trajectory(record: &str) -> Result<Trajectory, PersistError> {
    let mut lines = record.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| PersistError::Format("empty record".into()))?;
    let probe: VersionProbe = serde_json::from_str(first)?;
    if probe.format.as_deref() != Some(TRAJECTORY_FORMAT) {
        return Err(PersistError::Format(format!("unexpected format {:?}", probe.format)));
    }
    match probe.version {
        Some(TRAJECTORY_VERSION) => {}
        Some(found) => {
            return Err(PersistError::SchemaVersionMismatch {
                found,
                supported: TRAJECTORY_VERSION,
            })
        }
        None => return Err(PersistError::Format("missing version".into())),
    }
    let header: Header = serde_json::from_str(first)?;
    let steps = lines.map(serde_json::from_str::<Step>).collect::<Result<Vec<_>, _>>()?;
    if steps.len() != header.steps {
        return Err(PersistError::Format(format!(
            "header announces {} steps, found {}",
            header.steps,
            steps.len()
        )));
    }
    Ok(Trajectory {
        goal: header.goal,
        platform: header.platform,
        task_id: header.task_id,
        initial_subgoals: header.initial_subgoals,
        steps,
        terminal_status: header.terminal_status,
        answer: header.answer,
        failures: header.failures,
    })
}

pub fn write_trajectory_file(path: &Path, traj: &Trajectory) -> Result<(), PersistError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(persist_trajectory(traj).as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn read_trajectory_file(path: &Path) -> Result<Trajectory, PersistError> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut text = String::new();
    for line in f.lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    load_trajectory(&text)
}
