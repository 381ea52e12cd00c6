//! TOML run configuration.
//!
//! ```toml
//! [experiment]
//! task = "putbox"
//! algorithm = "td3"
//! seed = 0
//! total_steps = 50000
//!
//! [guidance]
//! base_policy = true
//!
//! [td3]
//! batch_size = 256
//!
//! [planner]
//! plans = "fixtures/plans"
//! offline = true
//!
//! [backend]
//! model = "gpt-4o"
//! api_key_env = "OPENAI_API_KEY"
//!
//! [output]
//! out = "runs/putbox"
//! ```
//!
//! Module sections (`guidance`, `env`, `controller`, `termination`,
//! `selection`, `td3`, `ppo`) take the field names of the matching core types.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tale_core::env::TaskId;
use tale_core::harness::ExperimentConfig;

use crate::backend::BackendConfig;
use crate::error::{Result, TaleError};

const MODULE_SECTIONS: [&str; 7] = ["guidance", "env", "controller", "termination", "selection", "td3", "ppo"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Directory holding `<task>.json` plan caches.
    pub plans: Option<PathBuf>,
    /// Never contact the backend.
    pub offline: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub out: Option<PathBuf>,
    /// Checkpoint every this many completed episodes; 0 keeps only the final one.
    pub checkpoint_every: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { out: None, checkpoint_every: 50 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// The file named a task.
    pub task_given: bool,
    pub planner: PlannerConfig,
    pub backend: BackendConfig,
    pub output: OutputConfig,
    pub scene: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SceneSection {
    path: Option<PathBuf>,
}

fn section(root: &mut toml::Table, name: &str) -> Result<toml::Table> {
    match root.remove(name) {
        None => Ok(toml::Table::new()),
        Some(toml::Value::Table(t)) => Ok(t),
        Some(_) => Err(TaleError::Config(format!("`{name}` must be a table"))),
    }
}

fn typed<T: serde::de::DeserializeOwned>(name: &str, t: toml::Table) -> Result<T> {
    toml::Value::Table(t).try_into().map_err(|e| TaleError::Config(format!("[{name}] {e}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut root: toml::Table = text.parse().map_err(|e: toml::de::Error| TaleError::Config(e.to_string()))?;
        let mut exp = section(&mut root, "experiment")?;
        let task_given = match exp.get("task") {
            None => false,
            Some(toml::Value::String(s)) => {
                let id: TaskId = s.parse().map_err(|e| TaleError::Config(format!("{e}")))?;
                exp.insert("task".into(), id.as_str().into());
                true
            }
            Some(_) => return Err(TaleError::Config("`experiment.task` must be a string".into())),
        };
        for name in MODULE_SECTIONS {
            if let Some(v) = root.remove(name) {
                exp.insert(name.into(), v);
            }
        }
        let experiment: ExperimentConfig = typed("experiment", exp)?;
        let planner = typed("planner", section(&mut root, "planner")?)?;
        let backend = typed("backend", section(&mut root, "backend")?)?;
        let output = typed("output", section(&mut root, "output")?)?;
        let scene: SceneSection = typed("scene", section(&mut root, "scene")?)?;
        if let Some(k) = root.keys().next() {
            return Err(TaleError::Config(format!("unknown section `{k}`")));
        }
        Ok(RunConfig { experiment, task_given, planner, backend, output, scene: scene.path })
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(TaleError::io(path))?;
        RunConfig::parse(&text).map_err(|e| match e {
            TaleError::Config(m) => TaleError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }
}

/// The experiment block written back in the sectioned file layout. TOML
/// integers are signed, so seeds and counts above `i64::MAX` are rejected.
pub fn experiment_to_toml(cfg: &ExperimentConfig) -> Result<String> {
    let unrepresentable = |e: toml::ser::Error| TaleError::Config(format!("cannot write configuration as TOML: {e}"));
    let toml::Value::Table(mut flat) = toml::Value::try_from(cfg).map_err(unrepresentable)? else {
        unreachable!("structs serialize to tables")
    };
    let mut root = toml::Table::new();
    let mut modules = Vec::new();
    for name in MODULE_SECTIONS {
        if let Some(v) = flat.remove(name) {
            modules.push((name, v));
        }
    }
    flat.insert("task".into(), cfg.task.short_name().into());
    root.insert("experiment".into(), toml::Value::Table(flat));
    for (name, v) in modules {
        root.insert(name.into(), v);
    }
    toml::to_string(&root).map_err(unrepresentable)
}
