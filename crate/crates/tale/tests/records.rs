use tale::records::{metrics_header, read_success_curve, write_episodes, write_explore, write_metrics};
use tale_core::env::TaskId;
use tale_core::harness::{Algorithm, ExperimentConfig, Trainer, ZeroClock};
use tale_core::planner::fixture_plan;

fn trained() -> Trainer {
    let mut cfg = ExperimentConfig::new(TaskId::PutBoxMini, Algorithm::Td3, 4);
    cfg.total_steps = 400;
    cfg.eval_interval = 200;
    cfg.eval_episodes = 2;
    cfg.td3.warmup_steps = 100;
    cfg.td3.batch_size = 16;
    cfg.td3.hidden = vec![8];
    let mut t = Trainer::new(cfg, fixture_plan(TaskId::PutBoxMini)).unwrap();
    t.run(&ZeroClock, &mut |_, _| Ok(())).unwrap();
    t
}

#[test]
fn metrics_header_lists_every_mode() {
    let h = metrics_header(&[2, 2]);
    assert_eq!(&h[..6], ["env_step", "train_episodes", "success_rate", "mean_return", "mean_length", "wall_clock"]);
    assert_eq!(&h[6..], ["p_0_0", "p_0_1", "p_1_0", "p_1_1", "v_0_0", "v_0_1", "v_1_0", "v_1_1"]);
}

#[test]
fn csv_files_have_one_row_per_record() {
    let t = trained();
    let modes = t.plan.mode_counts();
    let tmp = tempfile::tempdir().unwrap();
    let metrics = tmp.path().join("out/metrics.csv");
    write_metrics(&metrics, &t.metrics, &modes).unwrap();
    let curve = read_success_curve(&metrics).unwrap();
    assert_eq!(curve.len() as u64, t.cfg.expected_rows());
    assert_eq!(curve.iter().map(|c| c.0).collect::<Vec<_>>(), [0, 200, 400]);
    for ((step, rate), row) in curve.iter().zip(&t.metrics) {
        assert_eq!((*step, *rate), (row.env_step, row.success_rate));
    }

    let mut r = csv::Reader::from_path(&metrics).unwrap();
    let width = r.headers().unwrap().len();
    assert_eq!(width, metrics_header(&modes).len());
    assert!(r.records().all(|rec| rec.unwrap().len() == width));

    let explore = tmp.path().join("explore.csv");
    write_explore(&explore, &t.explore_log, &modes).unwrap();
    let mut r = csv::Reader::from_path(&explore).unwrap();
    assert_eq!(r.headers().unwrap().len(), 3 + 4 * 2);
    assert_eq!(r.records().count(), t.explore_log.len());

    let report = t.evaluate(3).unwrap();
    let eval = tmp.path().join("eval.csv");
    write_episodes(&eval, &report.episodes).unwrap();
    let mut r = csv::Reader::from_path(&eval).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["seed", "success", "collision", "return", "length", "modes"]);
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for (row, ep) in rows.iter().zip(&report.episodes) {
        assert_eq!(row[0].parse::<u64>().unwrap(), ep.seed);
        assert_eq!(row[5].split('-').count(), ep.selections.len());
    }
}

#[test]
fn malformed_metrics_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("m.csv");
    std::fs::write(&p, "env_step,train_episodes,success_rate\nx,0,0.5\n").unwrap();
    assert!(read_success_curve(&p).is_err());
}
