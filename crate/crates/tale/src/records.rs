//! CSV output.
//!
//! `metrics.csv`: `env_step, train_episodes, success_rate, mean_return,
//! mean_length, wall_clock`, then `p_<j>_<i>` and `v_<j>_<i>` for every
//! primitive `j` and mode `i` (empty where no evaluation episode reached `j`).
//!
//! `explore.csv`: `episode, primitive, chosen`, then `value_<i>`, `c_<i>`,
//! `prob_<i>` and `ema_<i>` for `i` up to the largest mode count.
//!
//! `eval.csv`: `seed, success, collision, return, length, modes` with modes
//! joined by `-`.

use std::path::Path;

use tale_core::harness::{EpisodeRecord, ExploreRow, MetricsRow};

use crate::error::{Result, TaleError};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(TaleError::io(dir))?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> TaleError {
    TaleError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

pub fn metrics_header(modes: &[usize]) -> Vec<String> {
    let mut h: Vec<String> = ["env_step", "train_episodes", "success_rate", "mean_return", "mean_length", "wall_clock"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["p", "v"] {
        for (j, &m) in modes.iter().enumerate() {
            h.extend((0..m).map(|i| format!("{prefix}_{j}_{i}")));
        }
    }
    h
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow], modes: &[usize]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(metrics_header(modes)).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![
            r.env_step.to_string(),
            r.train_episodes.to_string(),
            r.success_rate.to_string(),
            r.mean_return.to_string(),
            r.mean_length.to_string(),
            format!("{:.3}", r.wall_clock),
        ];
        rec.extend(r.mode_probs.iter().flatten().map(|v| opt(*v)));
        rec.extend(r.mode_values.iter().flatten().map(|v| opt(*v)));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(TaleError::io(path))
}

pub fn write_explore(path: &Path, rows: &[ExploreRow], modes: &[usize]) -> Result<()> {
    let width = modes.iter().copied().max().unwrap_or(0);
    let mut w = writer(path)?;
    let mut h: Vec<String> = vec!["episode".into(), "primitive".into(), "chosen".into()];
    for name in ["value", "c", "prob", "ema"] {
        h.extend((0..width).map(|i| format!("{name}_{i}")));
    }
    w.write_record(&h).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let s = &r.selection;
        let mut rec = vec![r.episode.to_string(), s.primitive.to_string(), s.chosen.to_string()];
        let pad = |v: Vec<String>| v.into_iter().chain(std::iter::repeat(String::new())).take(width);
        rec.extend(pad(s.values.iter().map(|v| v.to_string()).collect()));
        rec.extend(pad(s.c.iter().map(|v| v.to_string()).collect()));
        rec.extend(pad(s.probs.iter().map(|v| v.to_string()).collect()));
        rec.extend(pad(r.ema.iter().map(|v| opt(*v)).collect()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(TaleError::io(path))
}

pub fn write_episodes(path: &Path, eps: &[EpisodeRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["seed", "success", "collision", "return", "length", "modes"]).map_err(|e| csv_err(path, e))?;
    for e in eps {
        let modes: Vec<String> = e.modes().iter().map(|m| m.to_string()).collect();
        w.write_record([
            e.seed.to_string(),
            e.success.to_string(),
            e.collision.to_string(),
            e.episode_return.to_string(),
            e.length.to_string(),
            modes.join("-"),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(TaleError::io(path))
}

/// Reads back the `env_step` and `success_rate` columns of a metrics file.
pub fn read_success_curve(path: &Path) -> Result<Vec<(u64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let step = rec.get(0).and_then(|s| s.parse().ok());
        let rate = rec.get(2).and_then(|s| s.parse().ok());
        match (step, rate) {
            (Some(s), Some(p)) => out.push((s, p)),
            _ => return Err(TaleError::Checkpoint(format!("{}: malformed metrics row", path.display()))),
        }
    }
    Ok(out)
}
