use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use guiagent_annotator::AnnotatorConfig;
use guiagent_core::actions::{parse_grounded, Platform};
use guiagent_core::datapipe::{ingest, write_samples_file};
use guiagent_core::episode::{run_episode, write_trajectory_file, EpisodeConfig};
use guiagent_core::metrics::{aggregate, TaskResult};
use guiagent_core::mixture::{build_manifest, bundled_spec, MixtureSpec};
use guiagent_core::model_io::http::{EndpointConfig, HttpGrounder, HttpPlanner};
use guiagent_core::model_io::{GrounderClient, PlannerClient, ScriptedPlanner};
use guiagent_core::sim_env::{bundled_packs, oracle_solve, plan_replies, SimEnv, SimGrounder, TaskPack};

#[derive(Parser)]
#[command(name = "guiagent", version, about = "GUI agent harness tools")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a training manifest from a mixture spec.
    Mix {
        /// Spec file, or the name of a bundled spec.
        #[arg(long)]
        spec: String,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Human annotation service.
    Annotate {
        #[command(subcommand)]
        cmd: AnnotateCmd,
    },
    /// Run simulator episodes and report SR / PR.
    Eval {
        /// Task-pack directories; the bundled packs when omitted.
        #[arg(long = "pack")]
        packs: Vec<PathBuf>,
        /// Restrict to these task ids.
        #[arg(long = "task")]
        tasks: Vec<String>,
        #[arg(long, value_enum, default_value_t = Agent::Oracle)]
        agent: Agent,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        max_steps: usize,
        /// Endpoint settings (TOML); environment variables fill the gaps.
        #[arg(long)]
        endpoints: Option<PathBuf>,
        /// Directory for trajectories and the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a source dump into standard samples.
    Ingest {
        #[arg(long)]
        adapter: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a grounded action and print its canonical form.
    ParseAction {
        #[arg(long, default_value = "web")]
        platform: String,
        text: String,
    },
}

#[derive(Subcommand)]
enum AnnotateCmd {
    Serve {
        /// TOML config; environment variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long = "pack")]
        packs: Vec<PathBuf>,
        #[arg(long)]
        export_dir: Option<PathBuf>,
        #[arg(long)]
        session_store: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Agent {
    /// Replays the shortest plan found by search.
    Oracle,
    /// Planner and grounder behind HTTP endpoints.
    Http,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Mix { spec, seed, out } => mix(&spec, seed, &out),
        Cmd::Annotate {
            cmd:
                AnnotateCmd::Serve {
                    config,
                    bind,
                    packs,
                    export_dir,
                    session_store,
                },
        } => {
            let mut cfg = match config {
                Some(p) => AnnotatorConfig::from_file(&p)?,
                None => AnnotatorConfig::default(),
            }
            .with_env();
            if let Some(b) = bind {
                cfg.bind = b;
            }
            if !packs.is_empty() {
                cfg.packs = packs;
            }
            if let Some(d) = export_dir {
                cfg.export_dir = d;
            }
            if session_store.is_some() {
                cfg.session_store = session_store;
            }
            eprintln!("annotation service listening on {}", cfg.bind);
            tokio::runtime::Runtime::new()?.block_on(guiagent_annotator::serve(cfg))?;
            Ok(())
        }
        Cmd::Eval {
            packs,
            tasks,
            agent,
            seed,
            max_steps,
            endpoints,
            out,
        } => eval(
            &packs,
            &tasks,
            agent,
            seed,
            max_steps,
            endpoints.as_deref(),
            out.as_deref(),
        ),
        Cmd::Ingest { adapter, input, out } => {
            let report = ingest(&input, &adapter)?;
            write_samples_file(&out, &report.samples)?;
            println!(
                "{} records, {} samples, {} rejected",
                report.records,
                report.samples.len(),
                report.rejects.len()
            );
            for r in &report.rejects {
                eprintln!("  record {}: {}", r.index, r.reason);
            }
            Ok(())
        }
        Cmd::ParseAction { platform, text } => {
            let platform: Platform = platform.parse().map_err(anyhow::Error::msg)?;
            let a = parse_grounded(&text, platform)?;
            println!("{}", a.serialize());
            println!("{}", serde_json::to_string(&a)?);
            Ok(())
        }
    }
}

fn mix(spec: &str, seed: Option<u64>, out: &Path) -> Result<()> {
    let path = Path::new(spec);
    let mut spec = if path.is_file() {
        MixtureSpec::from_file(path)?
    } else {
        bundled_spec(spec).with_context(|| format!("`{spec}` is neither a file nor a bundled spec"))?
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let m = build_manifest(&spec)?;
    let digest = m.write_dir(out)?;
    let h = &m.header;
    println!("{} (seed {})", h.name, h.seed);
    println!(
        "mid samples {}, gui in A {}, |A| {}, |B| {}",
        h.mid_samples, h.gui_in_a, h.segment_a, h.segment_b
    );
    for (domain, n) in &h.domain_counts {
        println!("  {domain}: {n}");
    }
    println!("digest {digest}");
    Ok(())
}

fn eval(
    pack_dirs: &[PathBuf],
    only: &[String],
    agent: Agent,
    seed: u64,
    max_steps: usize,
    endpoints: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let packs: Vec<TaskPack> = if pack_dirs.is_empty() {
        bundled_packs()
    } else {
        pack_dirs
            .iter()
            .map(|d| TaskPack::load_dir(d))
            .collect::<Result<_, _>>()?
    };
    let http = if agent == Agent::Http {
        let cfg = match endpoints {
            Some(p) => EndpointConfig::from_toml_str(&std::fs::read_to_string(p)?)?,
            None => EndpointConfig::default(),
        }
        .with_env();
        let planner = HttpPlanner::from_config(&cfg).context("no planner endpoint configured")?;
        let grounder = HttpGrounder::from_config(&cfg).context("no grounder endpoint configured")?;
        Some((
            Arc::new(planner) as Arc<dyn PlannerClient>,
            Arc::new(grounder) as Arc<dyn GrounderClient>,
        ))
    } else {
        None
    };

    if let Some(dir) = out {
        std::fs::create_dir_all(dir.join("trajectories"))?;
    }
    let mut results = Vec::new();
    for pack in &packs {
        let graph = Arc::new(pack.graph.clone());
        for spec in pack.tasks.iter().filter(|t| only.is_empty() || only.contains(&t.id)) {
            let task = spec.instantiate(&graph, seed);
            let mut cfg = EpisodeConfig::new(task.goal.clone(), task.platform);
            cfg.task_id = Some(task.id.clone());
            cfg.max_steps = max_steps;
            let mut env = SimEnv::new(graph.clone(), task.clone()).with_assets(pack.asset_dir.clone());
            let traj = match &http {
                Some((planner, grounder)) => run_episode(&mut env, planner.as_ref(), grounder.as_ref(), &cfg)?,
                None => {
                    let oracle = oracle_solve(&graph, &task, max_steps)?;
                    let finish = if oracle.solvable { "completed" } else { "infeasible" };
                    let planner = ScriptedPlanner::from_sequence(plan_replies(&oracle.plan, finish));
                    run_episode(&mut env, &planner, &SimGrounder::new(graph.clone()), &cfg)?
                }
            };
            let id = format!("{}/{}", graph.name, task.id);
            let r = TaskResult::from_trajectory(&id, &traj)?;
            println!(
                "{id}: success={} progress={:.3} steps={}",
                r.success, r.progress, r.steps_used
            );
            if let Some(dir) = out {
                write_trajectory_file(
                    &dir.join("trajectories")
                        .join(format!("{}__{}.jsonl", graph.name, task.id)),
                    &traj,
                )?;
            }
            results.push(r);
        }
    }
    if results.is_empty() {
        bail!("no tasks matched");
    }
    let report = aggregate("sim", results, "")?;
    println!("SR {}  PR {}", report.sr_display(), report.pr_display());
    if let Some(dir) = out {
        std::fs::write(dir.join("report.json"), report.to_json())?;
    }
    Ok(())
}
