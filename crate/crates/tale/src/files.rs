//! Plan caches, scene files and atomic writes.

use std::fs;
use std::path::{Path, PathBuf};

use tale_core::env::{TaskId, TaskSpec};
use tale_core::planner::{plan_from_json, plan_to_json, TaskPlan};

use crate::error::{Result, TaleError};

/// Cache file for `task` under `dir`. A `plans/` subdirectory is honored, so
/// both `fixtures/` and `fixtures/plans/` work.
pub fn plan_path(dir: &Path, task: TaskId) -> PathBuf {
    let name = format!("{}.json", task.short_name());
    let nested = dir.join("plans").join(&name);
    if !dir.join(&name).exists() && nested.exists() {
        return nested;
    }
    dir.join(name)
}

pub fn scene_path(dir: &Path, task: TaskId) -> PathBuf {
    let name = format!("{}.json", task.short_name());
    let nested = dir.join("scenes").join(&name);
    if !dir.join(&name).exists() && nested.exists() {
        return nested;
    }
    dir.join(name)
}

pub fn read_plan(path: &Path) -> Result<TaskPlan> {
    let text = fs::read_to_string(path).map_err(TaleError::io(path))?;
    plan_from_json(&text).map_err(|e| TaleError::Plan(format!("{}: {e}", path.display())))
}

pub fn write_plan(path: &Path, plan: &TaskPlan) -> Result<()> {
    write_atomic(path, plan_to_json(plan).as_bytes())
}

pub fn scene_to_json(spec: &TaskSpec) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("scene serializes");
    s.push('\n');
    s
}

pub fn read_scene(path: &Path) -> Result<TaskSpec> {
    let text = fs::read_to_string(path).map_err(TaleError::io(path))?;
    let spec: TaskSpec =
        serde_json::from_str(&text).map_err(|e| TaleError::Scene(format!("{}: {e}", path.display())))?;
    spec.validate().map_err(|e| TaleError::Scene(format!("{}: {e}", path.display())))?;
    Ok(spec)
}

/// Writes through a sibling temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(TaleError::io(dir))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(TaleError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(TaleError::io(path))
}
