use std::sync::Arc;

use super::{
    Author, Environment, EnvironmentFault, EpisodeConfig, EpisodeError, FailureKind, Step, StepFailure, TerminalStatus,
    Trajectory,
};
use crate::actions::{ground, ActionKind, StopStatus};
use crate::model_io::{
    build_planner_prompt, call_grounder, call_planner, parse_planner_output, GrounderClient, GrounderRequest,
    PlannerClient,
};

fn fault(e: EnvironmentFault, traj: Trajectory) -> EpisodeError {
    EpisodeError::Environment {
        fault: e,
        partial: Box::new(traj),
    }
}

/// Runs one episode from the environment's current state.
///
/// Each iteration makes one planner call. Iterations that yield no
/// executable action are logged in `failures` without touching the
/// environment; `stop_on_parse_error_after` consecutive ones abort.
pub fn run_episode<E, P, G>(
    env: &mut E,
    planner: &P,
    grounder: &G,
    cfg: &EpisodeConfig,
) -> Result<Trajectory, EpisodeError>
where
    E: Environment + ?Sized,
    P: PlannerClient + ?Sized,
    G: GrounderClient + ?Sized,
{
    if cfg.max_steps == 0 {
        return Err(EpisodeError::Config("max_steps must be at least 1".into()));
    }
    let platform = cfg.platform;
    let template = cfg.template();
    let mut traj = Trajectory::new(cfg.goal.clone(), platform, env.subgoals());
    traj.task_id = cfg.task_id.clone();
    let mut memory: Vec<String> = Vec::new();
    let mut consecutive = 0usize;

    for iteration in 0..cfg.max_steps {
        let obs = match env.observe() {
            Ok(o) => o,
            Err(e) => return Err(fault(e, traj)),
        };
        let messages = match build_planner_prompt(&cfg.goal, &memory, &obs, template) {
            Ok(m) => m,
            Err(e) => return Err(fault(EnvironmentFault(e.to_string()), traj)),
        };

        let mut fail = |traj: &mut Trajectory, kind, error: String, raw: Option<String>| {
            traj.failures.push(StepFailure {
                iteration,
                kind,
                error,
                raw,
            });
            consecutive += 1;
            consecutive >= cfg.stop_on_parse_error_after.max(1)
        };

        let raw = match call_planner(planner, &messages, &cfg.decoding, &cfg.retry) {
            Ok(r) => r,
            Err(e) => {
                if fail(&mut traj, FailureKind::Endpoint, e.to_string(), None) {
                    traj.terminal_status = TerminalStatus::Aborted;
                    return Ok(traj);
                }
                continue;
            }
        };
        let parsed = parse_planner_output(&raw).and_then(|out| {
            out.action
                .validate(Some(platform))
                .map(|_| out)
                .map_err(crate::model_io::PlannerParseError::InvalidAction)
        });
        let out = match parsed {
            Ok(o) => o,
            Err(e) => {
                if fail(&mut traj, FailureKind::Parse, e.to_string(), Some(raw)) {
                    traj.terminal_status = TerminalStatus::Aborted;
                    return Ok(traj);
                }
                continue;
            }
        };
        let coord = if out.action.needs_target(platform) {
            let req = GrounderRequest {
                element_description: out.action.element_description.clone(),
                screenshot: obs.screenshot.clone(),
                platform,
            };
            match call_grounder(grounder, &req, &cfg.retry) {
                Ok(r) => Some(r.coord),
                Err(e) => {
                    if fail(&mut traj, FailureKind::Grounding, e.to_string(), Some(raw)) {
                        traj.terminal_status = TerminalStatus::Aborted;
                        return Ok(traj);
                    }
                    continue;
                }
            }
        } else {
            None
        };
        let grounded = match ground(&out.action, coord, platform) {
            Ok(g) => g,
            Err(e) => {
                if fail(&mut traj, FailureKind::Grounding, e.to_string(), Some(raw)) {
                    traj.terminal_status = TerminalStatus::Aborted;
                    return Ok(traj);
                }
                continue;
            }
        };
        consecutive = 0;

        let effect = match env.apply(&grounded) {
            Ok(e) => e,
            Err(e) => return Err(fault(e, traj)),
        };
        memory.push(out.action.summary());
        let is_stop = grounded.kind == ActionKind::Stop;
        let stop_value = grounded.value.clone();
        traj.steps.push(Step {
            observation: obs,
            thought: out.thought,
            raw,
            high_level: out.action,
            grounded,
            subgoal_snapshot: env.subgoals(),
            policy_prob: None,
            transition_prob: effect.transition_prob,
            post_state_digest: Some(env.state_digest()),
            author: Author::Model,
        });
        if is_stop {
            let status = StopStatus::from_value(stop_value.as_deref().unwrap_or_default());
            traj.terminal_status = match status {
                StopStatus::Infeasible => TerminalStatus::Infeasible,
                StopStatus::Completed => TerminalStatus::Completed,
                StopStatus::Answer(a) => {
                    traj.answer = Some(a);
                    TerminalStatus::Completed
                }
            };
            return Ok(traj);
        }
    }
    traj.terminal_status = TerminalStatus::StepLimit;
    Ok(traj)
}

/// One independent episode: its own environment and shared endpoint handles.
pub struct EpisodeJob {
    pub env: Box<dyn Environment>,
    pub planner: Arc<dyn PlannerClient>,
    pub grounder: Arc<dyn GrounderClient>,
    pub config: EpisodeConfig,
}

fn run_job(mut job: EpisodeJob) -> Result<Trajectory, EpisodeError> {
    job.env.reset().map_err(|e| {
        fault(
            e,
            Trajectory::new(job.config.goal.clone(), job.config.platform, Vec::new()),
        )
    })?;
    run_episode(
        job.env.as_mut(),
        job.planner.as_ref(),
        job.grounder.as_ref(),
        &job.config,
    )
}

/// Runs episodes concurrently; results come back in job order.
pub fn run_episodes(jobs: Vec<EpisodeJob>) -> Vec<Result<Trajectory, EpisodeError>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.into_par_iter().map(run_job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.into_iter().map(run_job).collect()
    }
}
