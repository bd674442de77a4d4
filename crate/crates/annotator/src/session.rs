//! Sessions and the (optionally persisted) session store.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use guiagent_core::episode::{Environment, Trajectory};
use guiagent_core::sim_env::{ScreenGraph, SimEnv, SimState, TaskInstance, TaskPack, TaskSpec};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::AnnotatorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The human chooses every action.
    #[default]
    Annotate,
    /// The human may ask the planner for a proposal before acting.
    Steer,
}

/// A loaded task pack, keyed by its environment name.
#[derive(Debug, Clone)]
pub struct LoadedPack {
    pub graph: Arc<ScreenGraph>,
    pub tasks: Vec<TaskSpec>,
    pub asset_dir: Option<PathBuf>,
}

impl From<TaskPack> for LoadedPack {
    fn from(p: TaskPack) -> Self {
        LoadedPack {
            graph: Arc::new(p.graph),
            tasks: p.tasks,
            asset_dir: p.asset_dir,
        }
    }
}

pub type Packs = BTreeMap<String, LoadedPack>;

pub fn index_packs(packs: impl IntoIterator<Item = TaskPack>) -> Result<Packs, AnnotatorError> {
    let mut out = Packs::new();
    for p in packs {
        let name = p.graph.name.clone();
        if out.insert(name.clone(), p.into()).is_some() {
            return Err(AnnotatorError::Config(format!("two task packs are named `{name}`")));
        }
    }
    Ok(out)
}

pub struct Session {
    pub id: String,
    pub pack: String,
    pub mode: Mode,
    pub created_at: u64,
    pub env: SimEnv,
    pub trajectory: Trajectory,
    /// Set by a stop action; sealed sessions accept no further actions.
    pub sealed: bool,
}

/// On-disk form of a session.
#[derive(Serialize, Deserialize)]
struct Saved {
    id: String,
    pack: String,
    mode: Mode,
    created_at: u64,
    task: TaskInstance,
    state: SimState,
    answer: Option<String>,
    step_index: usize,
    trajectory: Trajectory,
    sealed: bool,
}

impl Session {
    pub fn new(
        id: String,
        pack_name: &str,
        pack: &LoadedPack,
        task: TaskInstance,
        mode: Mode,
        created_at: u64,
    ) -> Self {
        let env = SimEnv::new(pack.graph.clone(), task.clone()).with_assets(pack.asset_dir.clone());
        let mut trajectory = Trajectory::new(task.goal.clone(), task.platform, env.subgoals());
        trajectory.task_id = Some(task.id.clone());
        Session {
            id,
            pack: pack_name.to_string(),
            mode,
            created_at,
            env,
            trajectory,
            sealed: false,
        }
    }

    fn to_saved(&self) -> Saved {
        Saved {
            id: self.id.clone(),
            pack: self.pack.clone(),
            mode: self.mode,
            created_at: self.created_at,
            task: self.env.task().clone(),
            state: self.env.state().clone(),
            answer: self.env.answer().map(String::from),
            step_index: self.env.step_index(),
            trajectory: self.trajectory.clone(),
            sealed: self.sealed,
        }
    }

    fn from_saved(s: Saved, packs: &Packs) -> Result<Self, String> {
        let pack = packs.get(&s.pack).ok_or_else(|| format!("unknown pack `{}`", s.pack))?;
        let mut env = SimEnv::new(pack.graph.clone(), s.task).with_assets(pack.asset_dir.clone());
        env.restore(s.state, s.answer, s.step_index)
            .map_err(|e| e.to_string())?;
        Ok(Session {
            id: s.id,
            pack: s.pack,
            mode: s.mode,
            created_at: s.created_at,
            env,
            trajectory: s.trajectory,
            sealed: s.sealed,
        })
    }
}

pub fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Why a session id could not be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Unknown,
    Expired,
}

struct Entry {
    created_at: u64,
    session: Arc<Mutex<Session>>,
}

/// Live sessions. The map lock is held only for lookups; each session has
/// its own lock, so work on one session never waits for another.
pub struct SessionStore {
    entries: RwLock<HashMap<String, Entry>>,
    expired: RwLock<HashSet<String>>,
    dir: Option<PathBuf>,
    ttl_secs: u64,
    skipped: Vec<String>,
}

impl SessionStore {
    pub fn in_memory(ttl_secs: u64) -> Self {
        SessionStore {
            entries: RwLock::default(),
            expired: RwLock::default(),
            dir: None,
            ttl_secs,
            skipped: Vec::new(),
        }
    }

    /// Opens a persisted store, resuming every session file that still
    /// matches a loaded pack.
    pub fn open(dir: &Path, ttl_secs: u64, packs: &Packs) -> Result<Self, AnnotatorError> {
        std::fs::create_dir_all(dir)?;
        let mut store = SessionStore {
            dir: Some(dir.to_path_buf()),
            ..SessionStore::in_memory(ttl_secs)
        };
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for path in files {
            let loaded = std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<Saved>(&t).map_err(|e| e.to_string()))
                .and_then(|s| Session::from_saved(s, packs));
            match loaded {
                Ok(s) => store.insert_now(s),
                Err(e) => store.skipped.push(format!("{}: {e}", path.display())),
            }
        }
        Ok(store)
    }

    /// Session files that could not be resumed, with the reason.
    pub fn skipped(&self) -> &[String] {
        &self.skipped
    }

    fn insert_now(&self, s: Session) {
        let entry = Entry {
            created_at: s.created_at,
            session: Arc::new(Mutex::new(s)),
        };
        let id = entry.session.try_lock().expect("fresh session").id.clone();
        self.entries.write().unwrap().insert(id, entry);
    }

    pub fn insert(&self, s: Session) -> Result<(), AnnotatorError> {
        self.save(&s)?;
        self.insert_now(s);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, Lookup> {
        let now = now_secs();
        {
            let entries = self.entries.read().unwrap();
            match entries.get(id) {
                Some(e) if now < e.created_at.saturating_add(self.ttl_secs) => return Ok(e.session.clone()),
                Some(_) => {}
                None => {
                    return Err(if self.expired.read().unwrap().contains(id) {
                        Lookup::Expired
                    } else {
                        Lookup::Unknown
                    })
                }
            }
        }
        self.entries.write().unwrap().remove(id);
        self.expired.write().unwrap().insert(id.to_string());
        if let Some(dir) = &self.dir {
            let _ = std::fs::remove_file(dir.join(format!("{id}.json")));
        }
        Err(Lookup::Expired)
    }

    /// Writes the session file (atomically) when the store is persisted.
    pub fn save(&self, s: &Session) -> Result<(), AnnotatorError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let body = serde_json::to_vec(&s.to_saved()).map_err(|e| AnnotatorError::Config(e.to_string()))?;
        let tmp = dir.join(format!("{}.json.tmp", s.id));
        std::fs::write(&tmp, body)?;
        std::fs::rename(&tmp, dir.join(format!("{}.json", s.id)))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
