use std::fs;
use std::path::Path;

use tale::checkpoint::{load, save};
use tale::error::TaleError;
use tale_core::agents::{PpoConfig, Td3Config};
use tale_core::env::TaskId;
use tale_core::harness::{Algorithm, ExperimentConfig, Trainer, ZeroClock};
use tale_core::planner::fixture_plan;

fn small(task: TaskId, algorithm: Algorithm, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        total_steps: 600,
        eval_interval: 200,
        eval_episodes: 3,
        td3: Td3Config { warmup_steps: 100, batch_size: 32, hidden: vec![16, 16], ..Td3Config::default() },
        ppo: PpoConfig { rollout: 128, minibatch: 32, hidden: vec![16, 16], ..PpoConfig::default() },
        ..ExperimentConfig::new(task, algorithm, seed)
    }
}

fn train(cfg: &ExperimentConfig) -> Trainer {
    let mut t = Trainer::new(cfg.clone(), fixture_plan(cfg.task)).unwrap();
    t.run(&ZeroClock, &mut |_, _| Ok(())).unwrap();
    t
}

/// Trains until `episodes` episodes are done and checkpoints there.
fn checkpoint_at(cfg: &ExperimentConfig, episodes: u64, dir: &Path) {
    let mut t = Trainer::new(cfg.clone(), fixture_plan(cfg.task)).unwrap();
    let mut saved = false;
    t.run(&ZeroClock, &mut |tr, _| {
        if tr.episodes == episodes {
            save(dir, tr, 0.0).unwrap();
            saved = true;
        }
        Ok(())
    })
    .unwrap();
    assert!(saved, "run ended before episode {episodes}");
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn resume_matches(task: TaskId, algorithm: Algorithm, seed: u64, at: u64) {
    let cfg = small(task, algorithm, seed);
    let full = train(&cfg);
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("ckpt");
    checkpoint_at(&cfg, at, &dir);

    let mut resumed = load(&dir).unwrap();
    assert_eq!(resumed.episodes, at);
    let again = tmp.path().join("again");
    save(&again, &resumed, 0.0).unwrap();
    assert_eq!(files(&dir), files(&again), "save after load is byte-identical");

    resumed.run(&ZeroClock, &mut |_, _| Ok(())).unwrap();
    assert_eq!(resumed.env_steps, full.env_steps);
    assert_eq!(resumed.metrics, full.metrics);
    assert_eq!(resumed.explore_log, full.explore_log);
    assert_eq!(resumed.table, full.table);
    let a = resumed.evaluate(4).unwrap();
    let b = full.evaluate(4).unwrap();
    assert_eq!(a.episodes, b.episodes);
}

#[test]
fn td3_resume_is_bit_identical() {
    resume_matches(TaskId::PegInsertMini, Algorithm::Td3, 5, 4);
}

#[test]
fn ppo_resume_is_bit_identical() {
    resume_matches(TaskId::PutBoxMini, Algorithm::Ppo, 2, 3);
}

#[test]
fn save_replaces_previous_checkpoint() {
    let cfg = small(TaskId::PickCubeMini, Algorithm::Td3, 1);
    let t = train(&cfg);
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("ckpt");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("stale.txt"), "x").unwrap();
    save(&dir, &t, 2.5).unwrap();
    assert!(!dir.join("stale.txt").exists());
    assert!(!tmp.path().join("ckpt.partial").exists());
    let back = load(&dir).unwrap();
    assert_eq!(back.env_steps, t.env_steps);
    assert_eq!(back.elapsed_offset, 2.5);
}

fn saved(tmp: &Path) -> std::path::PathBuf {
    let t = train(&small(TaskId::PickCubeMini, Algorithm::Td3, 3));
    let dir = tmp.join("ckpt");
    save(&dir, &t, 0.0).unwrap();
    dir
}

fn edit_manifest(dir: &Path, f: impl FnOnce(&mut serde_json::Value)) {
    let p = dir.join("manifest.json");
    let mut v: serde_json::Value = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
    f(&mut v);
    fs::write(&p, serde_json::to_vec(&v).unwrap()).unwrap();
}

fn assert_checkpoint_error(dir: &Path, needle: &str) {
    match load(dir) {
        Err(e @ TaleError::Checkpoint(_)) => {
            let msg = e.to_string();
            assert!(msg.contains(needle), "{msg}");
            assert_eq!(e.exit_code(), 5);
        }
        other => panic!("expected a checkpoint error, got {:?}", other.map(|t| t.describe())),
    }
}

#[test]
fn truncated_weights_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = saved(tmp.path());
    let p = dir.join("q1.weights");
    let bytes = fs::read(&p).unwrap();
    fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
    assert_checkpoint_error(&dir, "q1");
}

#[test]
fn wrong_version_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = saved(tmp.path());
    edit_manifest(&dir, |v| v["version"] = 99.into());
    assert_checkpoint_error(&dir, "version 99");
}

#[test]
fn wrong_observation_layout_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = saved(tmp.path());
    edit_manifest(&dir, |v| v["obs_layout"] = 0.into());
    assert_checkpoint_error(&dir, "observation layout");
}

#[test]
fn replay_length_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = saved(tmp.path());
    edit_manifest(&dir, |v| {
        let n = v["agent"]["replay_len"].as_u64().unwrap();
        v["agent"]["replay_len"] = (n + 1).into();
    });
    assert_checkpoint_error(&dir, "replay");
}

#[test]
fn garbled_manifest_and_missing_files_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = saved(tmp.path());
    fs::remove_file(dir.join("actor.weights")).unwrap();
    assert!(matches!(load(&dir), Err(TaleError::Io { .. })));
    fs::write(dir.join("manifest.json"), "{").unwrap();
    assert_checkpoint_error(&dir, "manifest");
    assert!(matches!(load(&tmp.path().join("nowhere")), Err(TaleError::Io { .. })));
}
