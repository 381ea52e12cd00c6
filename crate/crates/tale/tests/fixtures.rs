//! The checked-in fixture files must match the built-in scenes and plans.
//! Run with `TALE_BLESS=1` to regenerate them.

use std::path::PathBuf;

use tale::files::{plan_path, read_plan, read_scene, scene_path, scene_to_json};
use tale_core::env::{TaskId, TaskSpec};
use tale_core::planner::{fixture_plan, plan_to_json};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn bless() -> bool {
    std::env::var_os("TALE_BLESS").is_some()
}

#[test]
fn plan_fixtures_match_core() {
    for task in TaskId::ALL {
        let path = root().join("plans").join(format!("{}.json", task.short_name()));
        let want = plan_to_json(&fixture_plan(task));
        if bless() {
            std::fs::write(&path, &want).unwrap();
        }
        assert_eq!(std::fs::read_to_string(&path).unwrap(), want, "{}", path.display());
        assert_eq!(read_plan(&path).unwrap(), fixture_plan(task));
        assert_eq!(plan_path(&root(), task), path);
    }
}

#[test]
fn scene_fixtures_match_core() {
    for task in TaskId::ALL {
        let path = root().join("scenes").join(format!("{}.json", task.short_name()));
        let want = scene_to_json(&TaskSpec::builtin(task));
        if bless() {
            std::fs::write(&path, &want).unwrap();
        }
        assert_eq!(std::fs::read_to_string(&path).unwrap(), want, "{}", path.display());
        assert_eq!(read_scene(&path).unwrap(), TaskSpec::builtin(task));
        assert_eq!(scene_path(&root(), task), path);
    }
}
