use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::agents::{PpoConfig, Td3Config};
use crate::env::{reset, TaskId, TaskSpec};
use crate::planner::{fixture_plan, parse_to_goal};
use proptest::prelude::*;

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

fn record(success: bool) -> EpisodeRecord {
    EpisodeRecord { seed: 0, success, collision: false, episode_return: 0.0, length: 1, selections: vec![] }
}

#[test]
fn reward_combination() {
    assert_eq!(combine_reward(-0.3, 0.0), -0.3);
    assert_eq!(combine_reward(-0.731, 0.0), -0.731);
    assert!((combine_reward(-0.3, 10.0) - 9.7).abs() < 1e-12);
    assert!((combine_reward(-0.3, -5.0) + 5.3).abs() < 1e-12);
}

#[test]
fn eval_ratio() {
    let none = EvalReport::from_episodes((0..20).map(|_| record(false)).collect());
    assert_eq!(none.success_rate, 0.0);
    let most = EvalReport::from_episodes((0..20).map(|k| record(k < 18)).collect());
    assert_eq!(most.success_rate, 0.9);
}

#[test]
fn config_rejects_bad_parameters() {
    let ok = ExperimentConfig::default();
    ok.validate().unwrap();
    let cases: Vec<ExperimentConfig> = vec![
        ExperimentConfig { eval_interval: 0, ..ok.clone() },
        ExperimentConfig { eval_episodes: 0, ..ok.clone() },
        ExperimentConfig { residual_fraction: 0.0, ..ok.clone() },
        ExperimentConfig { residual_fraction: 1.5, ..ok.clone() },
        ExperimentConfig { primitive_budget: 0, ..ok.clone() },
        ExperimentConfig { env: EnvOverrides { collision_penalty: Some(-1.0), ..Default::default() }, ..ok.clone() },
        ExperimentConfig {
            selection: crate::explore::SelectionConfig { alpha: 1.0, ..Default::default() },
            ..ok.clone()
        },
        ExperimentConfig { td3: Td3Config { tau: 0.0, ..Td3Config::default() }, ..ok.clone() },
        ExperimentConfig {
            algorithm: Algorithm::Ppo,
            ppo: PpoConfig { clip: -0.1, ..PpoConfig::default() },
            ..ok.clone()
        },
    ];
    for c in cases {
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))), "{c:?}");
    }
}

#[test]
fn config_json_round_trip_and_defaults() {
    let cfg = small(TaskId::PutBoxMini, Algorithm::Ppo, 7);
    let text = serde_json::to_string(&cfg).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    let partial: ExperimentConfig = serde_json::from_str(r#"{"task":"PegInsertMini","seed":3}"#).unwrap();
    assert_eq!(partial.task, TaskId::PegInsertMini);
    assert_eq!(partial.total_steps, 50_000);
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus":1}"#).is_err());
    assert_eq!("PPO".parse::<Algorithm>().unwrap(), Algorithm::Ppo);
    assert!("sac".parse::<Algorithm>().is_err());
}

#[test]
fn env_overrides_apply() {
    let cfg = ExperimentConfig {
        env: EnvOverrides { max_episode_steps: Some(50), success_reward: Some(3.0), collision_penalty: None },
        ..Default::default()
    };
    let spec = cfg.task_spec();
    assert_eq!(spec.max_episode_steps, 50);
    assert_eq!(spec.rewards.success_reward, 3.0);
    assert_eq!(spec.rewards.collision_penalty, 5.0);
}

#[test]
fn residual_bounds_follow_guidance() {
    let cfg = ExperimentConfig::default();
    let spec = cfg.task_spec();
    let a = Agent::new(&cfg, &spec).unwrap();
    assert_eq!(a.bounds().0, vec![0.005, 0.005, 0.005, 0.025, 0.025, 0.025, 0.5]);
    let off = ExperimentConfig { guidance: Guidance::OFF, ..cfg };
    let b = Agent::new(&off, &spec).unwrap();
    assert_eq!(b.bounds().0, spec.limits.as_action_scale().to_vec());
}

#[test]
fn plan_mismatch_is_reported() {
    let mut plan = fixture_plan(TaskId::PickCubeMini);
    plan.steps[0].object_id = "sphere".into();
    let err = Trainer::new(ExperimentConfig::default(), plan).unwrap_err();
    assert!(matches!(err, HarnessError::PlanMismatch(_)));
    let wrong_task = fixture_plan(TaskId::PutBoxMini);
    assert!(matches!(check_plan(&wrong_task, &TaskSpec::builtin(TaskId::PickCubeMini)), Err(HarnessError::PlanMismatch(_))));
    let mut empty = fixture_plan(TaskId::PickCubeMini);
    empty.steps.clear();
    assert!(check_plan(&empty, &TaskSpec::builtin(TaskId::PickCubeMini)).is_err());
}

#[test]
fn training_is_deterministic() {
    for (task, algo) in [(TaskId::PickCubeMini, Algorithm::Td3), (TaskId::PutBoxMini, Algorithm::Ppo)] {
        let cfg = small(task, algo, 11);
        let a = train(&cfg);
        let b = train(&cfg);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.explore_log, b.explore_log);
        assert_eq!(a.table, b.table);
        assert_eq!(a.env_steps, 600);
        assert_eq!(a.metrics.len(), 4);
        let c = train(&small(task, algo, 12));
        assert_ne!(a.explore_log, c.explore_log);
    }
}

#[test]
fn rows_are_regular() {
    let t = train(&small(TaskId::PegInsertMini, Algorithm::Td3, 2));
    let steps: Vec<u64> = t.metrics.iter().map(|r| r.env_step).collect();
    assert_eq!(steps, vec![0, 200, 400, 600]);
    for r in &t.metrics {
        assert!((0.0..=1.0).contains(&r.success_rate));
        assert_eq!(r.mode_probs.len(), 2);
        let p: f64 = r.mode_probs[0].iter().map(|x| x.unwrap()).sum();
        assert!((p - 1.0).abs() < 1e-12);
        for row in &r.mode_probs[1] {
            assert!(row.is_none_or(|p| (0.0..=1.0).contains(&p)));
        }
    }
}

#[test]
fn resume_from_episode_boundary_matches() {
    let cfg = small(TaskId::PegInsertMini, Algorithm::Td3, 5);
    let full = train(&cfg);
    let mut snapshot = None;
    let mut t = Trainer::new(cfg.clone(), fixture_plan(cfg.task)).unwrap();
    t.run(&ZeroClock, &mut |tr, _| {
        if tr.episodes == 4 {
            snapshot = Some(tr.clone());
        }
        Ok(())
    })
    .unwrap();
    let mut resumed = snapshot.expect("four episodes within 600 steps");
    assert!(resumed.env_steps < 600);
    resumed.run(&ZeroClock, &mut |_, _| Ok(())).unwrap();
    assert_eq!(resumed.metrics, full.metrics);
    assert_eq!(resumed.explore_log, full.explore_log);
}

#[test]
fn goals_are_parsed_from_current_poses() {
    let cfg = small(TaskId::PutBoxMini, Algorithm::Td3, 9);
    let plan = fixture_plan(cfg.task);
    let spec = cfg.task_spec();
    let mut t = Trainer::new(cfg, plan.clone()).unwrap();
    let mut checked = 0;
    t.run(&ZeroClock, &mut |_, rec| {
        let s0 = reset(&spec, rec.seed);
        let sel = &rec.selections[0];
        let g = parse_to_goal(&s0.objects, &plan.steps[0].object_id, &plan.steps[0].affordances[sel.chosen]).unwrap();
        assert_eq!(sel.goal, g);
        checked += 1;
        Ok(())
    })
    .unwrap();
    assert!(checked > 2);
    let goals: Vec<_> = t.explore_log.iter().filter(|r| r.selection.primitive == 0).map(|r| r.selection.goal).collect();
    assert!(goals.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn exploration_off_uses_first_mode() {
    let cfg = ExperimentConfig {
        guidance: Guidance { exploration: false, ..Guidance::default() },
        ..small(TaskId::PegInsertMini, Algorithm::Td3, 1)
    };
    let t = train(&cfg);
    assert!(t.explore_log.iter().all(|r| r.selection.chosen == 0));
    assert!(t.table.c.iter().flatten().all(|&c| c == 1.0));
}

#[test]
fn exploration_decays_selected_modes() {
    let t = train(&small(TaskId::PegInsertMini, Algorithm::Td3, 3));
    let total: u64 = t.table.counts[0].iter().sum();
    assert_eq!(total as usize, t.explore_log.iter().filter(|r| r.selection.primitive == 0).count());
    for (c, n) in t.table.c[0].iter().zip(&t.table.counts[0]) {
        assert_eq!(*c, libm::pow(0.95, *n as f64).max(0.05));
    }
    let first: Vec<_> = t.explore_log.iter().filter(|r| r.selection.primitive == 0).collect();
    for w in first.windows(2) {
        for (a, b) in w[0].selection.c.iter().zip(&w[1].selection.c) {
            assert!(b <= a);
        }
    }
}

#[test]
fn base_policy_alone() {
    let pick = ExperimentConfig::new(TaskId::PickCubeMini, Algorithm::Td3, 0);
    let r = run_fixed_modes(&pick, &fixture_plan(TaskId::PickCubeMini), &[0, 0], 10).unwrap();
    assert_eq!(r.success_rate, 1.0);
    let put = ExperimentConfig::new(TaskId::PutBoxMini, Algorithm::Td3, 0);
    let r = run_fixed_modes(&put, &fixture_plan(TaskId::PutBoxMini), &[0, 0], 10).unwrap();
    assert_eq!(r.success_rate, 0.0);
    assert!(r.episodes.iter().all(|e| e.collision));
    assert!(run_fixed_modes(&put, &fixture_plan(TaskId::PutBoxMini), &[0], 1).is_err());
}

#[test]
fn eval_is_repeatable_and_pure() {
    let t = train(&small(TaskId::PickCubeMini, Algorithm::Ppo, 4));
    let before = t.agent.clone();
    let a = t.evaluate(4).unwrap();
    let b = t.evaluate(4).unwrap();
    assert_eq!(a, b);
    match (&before, &t.agent) {
        (Agent::Ppo(x), Agent::Ppo(y)) => assert_eq!(x.noise_rng.state(), y.noise_rng.state()),
        _ => unreachable!(),
    }
    let train_seeds: Vec<u64> = t.explore_log.iter().map(|r| crate::rng::training_episode_seed(4, r.episode)).collect();
    assert!(a.episodes.iter().all(|e| !train_seeds.contains(&e.seed)));
}

#[test]
fn non_finite_values_abort() {
    let cfg = small(TaskId::PickCubeMini, Algorithm::Td3, 0);
    let mut t = Trainer::new(cfg, fixture_plan(TaskId::PickCubeMini)).unwrap();
    if let Agent::Td3(a) = &mut t.agent {
        a.q1.params_mut()[0] = f64::NAN;
    }
    let err = t.run(&ZeroClock, &mut |_, _| Ok(())).unwrap_err();
    assert!(matches!(err, HarnessError::NonFinite { .. }), "{err:?}");
}

#[test]
fn sparse_control_rewards_are_extrinsic_only() {
    let cfg = ExperimentConfig { guidance: Guidance::OFF, ..small(TaskId::PickCubeMini, Algorithm::Td3, 0) };
    let mut t = Trainer::new(cfg, fixture_plan(TaskId::PickCubeMini)).unwrap();
    t.run(&ZeroClock, &mut |_, rec| {
        assert!(rec.episode_return == 0.0 || rec.episode_return == 10.0 || rec.episode_return == -5.0);
        Ok(())
    })
    .unwrap();
    if let Agent::Td3(a) = &t.agent {
        assert!(a.replay.iter().all(|x| x.base.iter().all(|b| *b == 0.0)));
    }
}

#[test]
fn transitions_hold_composed_inputs() {
    let t = train(&small(TaskId::PickCubeMini, Algorithm::Td3, 8));
    let Agent::Td3(a) = &t.agent else { unreachable!() };
    assert_eq!(a.replay.len(), 600);
    for x in a.replay.iter() {
        assert_eq!(x.obs.len(), crate::env::OBS_DIM);
        for (r, b) in x.residual.iter().zip(&a.bounds.0) {
            assert!(r.abs() <= *b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn row_count_formula(total in 0u64..260, interval in 1u64..120) {
        let cfg = ExperimentConfig {
            total_steps: total,
            eval_interval: interval,
            eval_episodes: 1,
            ..small(TaskId::PickCubeMini, Algorithm::Ppo, 0)
        };
        let t = train(&cfg);
        prop_assert_eq!(t.metrics.len() as u64, cfg.expected_rows());
        prop_assert!(t.metrics.windows(2).all(|w| w[0].env_step < w[1].env_step));
        prop_assert_eq!(t.env_steps, total);
    }
}
