//! Run checkpoints.
//!
//! A checkpoint is a directory with `manifest.json` (configuration, scene,
//! plan, counters, generator states, metrics so far) next to one weight file
//! per network, one moment file per optimizer and the replay or rollout
//! buffer. Restoring yields a trainer that continues bit-identically.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tale_core::agents::{PpoSample, ReplayBuffer, Td3Agent, Transition};
use tale_core::env::{TaskSpec, OBS_LAYOUT_VERSION};
use tale_core::explore::UncertaintyTable;
use tale_core::harness::{Agent, ExperimentConfig, ExploreRow, MetricsRow, Trainer};
use tale_core::nn::{decode_f64s, decode_weights, encode_f64s, encode_weights, Adam, AdamConfig, Mlp};
use tale_core::planner::TaskPlan;
use tale_core::rng::{CounterRng, RngState};

use crate::error::{Result, TaleError};
use crate::files::write_atomic;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct OptState {
    config: AdamConfig,
    t: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum AgentState {
    Td3 {
        updates: u64,
        noise: RngState,
        target: RngState,
        replay: RngState,
        warmup: RngState,
        optimizers: Vec<OptState>,
        replay_capacity: usize,
        replay_len: usize,
    },
    Ppo {
        updates: u64,
        log_std: Vec<f64>,
        noise: RngState,
        minibatch: RngState,
        optimizers: Vec<OptState>,
        rollout_len: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    obs_layout: u32,
    config: ExperimentConfig,
    scene: TaskSpec,
    plan: TaskPlan,
    env_steps: u64,
    episodes: u64,
    train_successes: u64,
    last_eval: Option<u64>,
    elapsed: f64,
    partial_episode: bool,
    table: UncertaintyTable,
    mode_rng: RngState,
    ema: Vec<Vec<Option<f64>>>,
    agent: AgentState,
    metrics: Vec<MetricsRow>,
    explore_log: Vec<ExploreRow>,
}

const TD3_NETS: [&str; 6] = ["actor", "actor_target", "q1", "q2", "q1_target", "q2_target"];
const TD3_OPTS: [&str; 3] = ["actor_opt", "q1_opt", "q2_opt"];
const PPO_NETS: [&str; 2] = ["actor", "value"];
const PPO_OPTS: [&str; 2] = ["actor_opt", "value_opt"];

fn td3_nets(a: &Td3Agent) -> [&Mlp; 6] {
    [&a.actor, &a.actor_target, &a.q1, &a.q2, &a.q1_target, &a.q2_target]
}

fn td3_nets_mut(a: &mut Td3Agent) -> [&mut Mlp; 6] {
    [&mut a.actor, &mut a.actor_target, &mut a.q1, &mut a.q2, &mut a.q1_target, &mut a.q2_target]
}

fn opt_state(o: &Adam) -> OptState {
    OptState { config: o.config, t: o.t }
}

fn moments(o: &Adam) -> Vec<u8> {
    let mut v = o.m.clone();
    v.extend_from_slice(&o.v);
    encode_f64s(&v)
}

fn restore_opt(o: &mut Adam, s: &OptState, bytes: &[u8], name: &str) -> Result<()> {
    let mv = decode_f64s(bytes)?;
    let n = o.m.len();
    if mv.len() != 2 * n {
        return Err(TaleError::Checkpoint(format!("{name}: {} moments, expected {}", mv.len(), 2 * n)));
    }
    o.m = mv[..n].to_vec();
    o.v = mv[n..].to_vec();
    o.t = s.t;
    o.config = s.config;
    Ok(())
}

fn flatten_transitions<'a>(it: impl Iterator<Item = &'a Transition>) -> Vec<f64> {
    let mut out = Vec::new();
    for t in it {
        out.extend_from_slice(&t.obs);
        out.extend_from_slice(&t.base);
        out.extend_from_slice(&t.residual);
        out.push(t.reward);
        out.extend_from_slice(&t.next_obs);
        out.extend_from_slice(&t.next_base);
        out.push(t.done as u8 as f64);
        out.push(t.truncated as u8 as f64);
    }
    out
}

fn unflatten_transitions(v: &[f64], n: usize, od: usize, ad: usize) -> Result<Vec<Transition>> {
    let w = 2 * od + 3 * ad + 3;
    if v.len() != n * w {
        return Err(TaleError::Checkpoint(format!("replay has {} values, expected {}", v.len(), n * w)));
    }
    Ok(v.chunks_exact(w)
        .map(|c| {
            let mut at = 0;
            let mut take = |k: usize| {
                let s = c[at..at + k].to_vec();
                at += k;
                s
            };
            let obs = take(od);
            let base = take(ad);
            let residual = take(ad);
            let reward = take(1)[0];
            let next_obs = take(od);
            let next_base = take(ad);
            let flags = take(2);
            Transition { obs, base, residual, reward, next_obs, next_base, done: flags[0] != 0.0, truncated: flags[1] != 0.0 }
        })
        .collect())
}

fn flatten_samples(s: &[PpoSample]) -> Vec<f64> {
    let mut out = Vec::new();
    for x in s {
        out.extend_from_slice(&x.obs);
        out.extend_from_slice(&x.u);
        out.extend_from_slice(&[x.log_prob, x.value, x.reward, x.next_value]);
        out.push(x.done as u8 as f64);
        out.push(x.truncated as u8 as f64);
    }
    out
}

fn unflatten_samples(v: &[f64], n: usize, od: usize, ad: usize) -> Result<Vec<PpoSample>> {
    let w = od + ad + 6;
    if v.len() != n * w {
        return Err(TaleError::Checkpoint(format!("rollout has {} values, expected {}", v.len(), n * w)));
    }
    Ok(v.chunks_exact(w)
        .map(|c| PpoSample {
            obs: c[..od].to_vec(),
            u: c[od..od + ad].to_vec(),
            log_prob: c[od + ad],
            value: c[od + ad + 1],
            reward: c[od + ad + 2],
            next_value: c[od + ad + 3],
            done: c[od + ad + 4] != 0.0,
            truncated: c[od + ad + 5] != 0.0,
        })
        .collect())
}

/// Writes `trainer` to `dir`, replacing any previous checkpoint there.
pub fn save(dir: &Path, trainer: &Trainer, elapsed: f64) -> Result<()> {
    let staging = dir.with_extension("partial");
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(TaleError::io(&staging))?;
    }
    fs::create_dir_all(&staging).map_err(TaleError::io(&staging))?;
    let put = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = staging.join(name);
        fs::write(&p, bytes).map_err(TaleError::io(&p))
    };
    let agent = match &trainer.agent {
        Agent::Td3(a) => {
            for (name, net) in TD3_NETS.iter().zip(td3_nets(a)) {
                put(&format!("{name}.weights"), &encode_weights(net))?;
            }
            let opts = [&a.actor_opt, &a.q1_opt, &a.q2_opt];
            for (name, o) in TD3_OPTS.iter().zip(opts) {
                put(&format!("{name}.moments"), &moments(o))?;
            }
            put("replay.f64", &encode_f64s(&flatten_transitions(a.replay.iter())))?;
            AgentState::Td3 {
                updates: a.updates,
                noise: a.noise_rng.state(),
                target: a.target_rng.state(),
                replay: a.replay_rng.state(),
                warmup: a.warmup_rng.state(),
                optimizers: opts.iter().map(|o| opt_state(o)).collect(),
                replay_capacity: a.replay.capacity(),
                replay_len: a.replay.len(),
            }
        }
        Agent::Ppo(a) => {
            for (name, net) in PPO_NETS.iter().zip([&a.actor, &a.value_net]) {
                put(&format!("{name}.weights"), &encode_weights(net))?;
            }
            for (name, o) in PPO_OPTS.iter().zip([&a.actor_opt, &a.value_opt]) {
                put(&format!("{name}.moments"), &moments(o))?;
            }
            put("rollout.f64", &encode_f64s(&flatten_samples(&a.rollout.samples)))?;
            AgentState::Ppo {
                updates: a.updates,
                log_std: a.log_std.clone(),
                noise: a.noise_rng.state(),
                minibatch: a.minibatch_rng.state(),
                optimizers: vec![opt_state(&a.actor_opt), opt_state(&a.value_opt)],
                rollout_len: a.rollout.samples.len(),
            }
        }
    };
    let m = Manifest {
        version: CHECKPOINT_VERSION,
        obs_layout: OBS_LAYOUT_VERSION,
        config: trainer.cfg.clone(),
        scene: trainer.task.clone(),
        plan: trainer.plan.clone(),
        env_steps: trainer.env_steps,
        episodes: trainer.episodes,
        train_successes: trainer.train_successes,
        last_eval: trainer.last_eval,
        elapsed,
        partial_episode: trainer.partial_episode,
        table: trainer.table.clone(),
        mode_rng: trainer.mode_rng.state(),
        ema: trainer.ema.clone(),
        agent,
        metrics: trainer.metrics.clone(),
        explore_log: trainer.explore_log.clone(),
    };
    let json = serde_json::to_vec_pretty(&m).map_err(|e| TaleError::Checkpoint(e.to_string()))?;
    write_atomic(&staging.join("manifest.json"), &json)?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(TaleError::io(dir))?;
    }
    fs::rename(&staging, dir).map_err(TaleError::io(dir))
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let p: PathBuf = dir.join(name);
    fs::read(&p).map_err(TaleError::io(&p))
}

fn load_net(dir: &Path, name: &str, into: &mut Mlp) -> Result<()> {
    let net = decode_weights(&read(dir, &format!("{name}.weights"))?, Some(into.widths()))
        .map_err(|e| TaleError::Checkpoint(format!("{name}: {e}")))?;
    if net.output_activation() != into.output_activation() {
        return Err(TaleError::Checkpoint(format!("{name}: output activation mismatch")));
    }
    *into = net;
    Ok(())
}

/// Rebuilds the trainer stored in `dir`.
pub fn load(dir: &Path) -> Result<Trainer> {
    let bytes = read(dir, "manifest.json")?;
    let m: Manifest = serde_json::from_slice(&bytes).map_err(|e| TaleError::Checkpoint(format!("manifest: {e}")))?;
    if m.version != CHECKPOINT_VERSION {
        return Err(TaleError::Checkpoint(format!("version {} (expected {CHECKPOINT_VERSION})", m.version)));
    }
    if m.obs_layout != OBS_LAYOUT_VERSION {
        return Err(TaleError::Checkpoint(format!("observation layout {} (expected {OBS_LAYOUT_VERSION})", m.obs_layout)));
    }
    let mut t = Trainer::with_scene(m.config, m.scene, m.plan)?;
    if t.table.c.iter().map(Vec::len).ne(m.table.c.iter().map(Vec::len)) {
        return Err(TaleError::Checkpoint("uncertainty table does not match the plan".into()));
    }
    t.env_steps = m.env_steps;
    t.episodes = m.episodes;
    t.train_successes = m.train_successes;
    t.last_eval = m.last_eval;
    t.elapsed_offset = m.elapsed;
    t.partial_episode = m.partial_episode;
    t.table = m.table;
    t.mode_rng = CounterRng::from_state(m.mode_rng);
    t.ema = m.ema;
    t.metrics = m.metrics;
    t.explore_log = m.explore_log;
    match (&mut t.agent, m.agent) {
        (
            Agent::Td3(a),
            AgentState::Td3 { updates, noise, target, replay, warmup, optimizers, replay_capacity, replay_len },
        ) => {
            for (name, net) in TD3_NETS.iter().zip(td3_nets_mut(a)) {
                load_net(dir, name, net)?;
            }
            if optimizers.len() != 3 {
                return Err(TaleError::Checkpoint("expected three optimizers".into()));
            }
            let opts = [&mut a.actor_opt, &mut a.q1_opt, &mut a.q2_opt];
            for ((name, o), s) in TD3_OPTS.iter().zip(opts).zip(&optimizers) {
                restore_opt(o, s, &read(dir, &format!("{name}.moments"))?, name)?;
            }
            let flat = decode_f64s(&read(dir, "replay.f64")?)?;
            let ts = unflatten_transitions(&flat, replay_len, a.obs_dim, a.act_dim())?;
            a.replay = ReplayBuffer::from_ordered(replay_capacity, ts);
            a.updates = updates;
            a.noise_rng = CounterRng::from_state(noise);
            a.target_rng = CounterRng::from_state(target);
            a.replay_rng = CounterRng::from_state(replay);
            a.warmup_rng = CounterRng::from_state(warmup);
        }
        (Agent::Ppo(a), AgentState::Ppo { updates, log_std, noise, minibatch, optimizers, rollout_len }) => {
            for (name, net) in PPO_NETS.iter().zip([&mut a.actor, &mut a.value_net]) {
                load_net(dir, name, net)?;
            }
            if optimizers.len() != 2 || log_std.len() != a.act_dim() {
                return Err(TaleError::Checkpoint("policy state does not match the agent".into()));
            }
            let opts = [&mut a.actor_opt, &mut a.value_opt];
            for ((name, o), s) in PPO_OPTS.iter().zip(opts).zip(&optimizers) {
                restore_opt(o, s, &read(dir, &format!("{name}.moments"))?, name)?;
            }
            let flat = decode_f64s(&read(dir, "rollout.f64")?)?;
            a.rollout.samples = unflatten_samples(&flat, rollout_len, a.obs_dim, a.act_dim())?;
            a.log_std = log_std;
            a.updates = updates;
            a.noise_rng = CounterRng::from_state(noise);
            a.minibatch_rng = CounterRng::from_state(minibatch);
        }
        _ => return Err(TaleError::Checkpoint("agent kind does not match the configured algorithm".into())),
    }
    Ok(t)
}
