use std::path::{Path, PathBuf};

use guiagent_core::model_io::http::EndpointConfig;
use serde::{Deserialize, Serialize};

use crate::AnnotatorError;

pub const BIND_ENV: &str = "GUIAGENT_ANNOTATE_BIND";
pub const PACKS_ENV: &str = "GUIAGENT_TASK_PACKS";
pub const EXPORT_ENV: &str = "GUIAGENT_EXPORT_DIR";
pub const STORE_ENV: &str = "GUIAGENT_SESSION_STORE";

/// Service settings, read from a TOML file and then overridden by the
/// environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatorConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    /// Task-pack directories. Empty means the bundled packs.
    #[serde(default)]
    pub packs: Vec<PathBuf>,
    #[serde(default = "default_export")]
    pub export_dir: PathBuf,
    /// Directory holding one file per session; sessions are memory-only
    /// without it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_store: Option<PathBuf>,
    #[serde(default = "default_ttl")]
    pub session_ttl_secs: u64,
    /// Planner endpoint used by `propose` in steer mode.
    #[serde(default)]
    pub endpoints: EndpointConfig,
}

fn default_bind() -> String {
    "127.0.0.1:8787".into()
}

fn default_export() -> PathBuf {
    PathBuf::from("exports")
}

fn default_ttl() -> u64 {
    2 * 60 * 60
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        AnnotatorConfig {
            bind: default_bind(),
            packs: Vec::new(),
            export_dir: default_export(),
            session_store: None,
            session_ttl_secs: default_ttl(),
            endpoints: EndpointConfig::default(),
        }
    }
}

impl AnnotatorConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, AnnotatorError> {
        toml::from_str(s).map_err(|e| AnnotatorError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths in it resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, AnnotatorError> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.packs.iter_mut().for_each(rebase);
        rebase(&mut cfg.export_dir);
        if let Some(s) = cfg.session_store.as_mut() {
            rebase(s);
        }
        Ok(cfg)
    }

    pub fn with_env(mut self) -> Self {
        if let Ok(v) = std::env::var(BIND_ENV) {
            self.bind = v;
        }
        if let Some(v) = std::env::var_os(PACKS_ENV) {
            self.packs = std::env::split_paths(&v).collect();
        }
        if let Some(v) = std::env::var_os(EXPORT_ENV) {
            self.export_dir = v.into();
        }
        if let Some(v) = std::env::var_os(STORE_ENV) {
            self.session_store = Some(v.into());
        }
        self.endpoints = self.endpoints.with_env();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotate.toml");
        std::fs::write(&path, "packs = [\"packs/a\"]\nsession_store = \"/abs/store\"\n").unwrap();
        let cfg = AnnotatorConfig::from_file(&path).unwrap();
        assert_eq!(cfg.packs, vec![dir.path().join("packs/a")]);
        assert_eq!(cfg.export_dir, dir.path().join("exports"));
        assert_eq!(cfg.session_store, Some(PathBuf::from("/abs/store")));
        assert_eq!(cfg.session_ttl_secs, 7200);
        assert!(AnnotatorConfig::from_toml_str("port = 1").is_err());
    }
}
