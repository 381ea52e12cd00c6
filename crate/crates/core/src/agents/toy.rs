//! One-dimensional point reaching, used to sanity-check the learners.

use alloc::vec;

use super::{AgentError, PpoAgent, PpoConfig, PpoSample, ResidualBounds, Td3Agent, Td3Config, Transition};
use crate::rng::{eval_episode_seed, streams, training_episode_seed, CounterRng};

pub const TOY_OBS_DIM: usize = 3;
pub const TOY_LIMIT: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointReach {
    pub x: f64,
    pub goal: f64,
    pub t: u32,
    pub half_range: f64,
    pub max_steps: u32,
    pub limit: f64,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyStep {
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
    pub success: bool,
}

impl PointReach {
    pub fn reset(seed: u64) -> Self {
        let mut rng = CounterRng::new(seed, streams::RESET);
        let half_range = 0.3;
        PointReach {
            x: rng.uniform_range(-half_range, half_range),
            goal: rng.uniform_range(-half_range, half_range),
            t: 0,
            half_range,
            max_steps: 50,
            limit: TOY_LIMIT,
            tolerance: 0.01,
        }
    }

    /// Positions scaled by 10, as in the manipulation observation.
    pub fn observe(&self) -> [f64; TOY_OBS_DIM] {
        [10.0 * self.x, 10.0 * self.goal, 10.0 * (self.goal - self.x)]
    }

    /// Moves by the clipped action. The reward mirrors the manipulation shaping:
    /// `-tanh(5e) - 0.25 tanh(|v| / π)` with `v = a / 0.1 s`, plus 10 on success.
    pub fn step(&mut self, a: f64) -> ToyStep {
        let a = a.clamp(-self.limit, self.limit);
        self.x = (self.x + a).clamp(-2.0 * self.half_range, 2.0 * self.half_range);
        self.t += 1;
        let e = (self.x - self.goal).abs();
        let mut reward = -libm::tanh(5.0 * e) - 0.25 * libm::tanh(a.abs() / 0.1 / core::f64::consts::PI);
        let success = e < self.tolerance;
        if success {
            reward += 10.0;
        }
        let truncated = !success && self.t >= self.max_steps;
        ToyStep { reward, done: success, truncated, success }
    }
}

/// Learner settings that solve the toy quickly.
pub fn toy_td3_config() -> Td3Config {
    Td3Config { batch_size: 64, warmup_steps: 500, actor_lr: 1e-3, critic_lr: 1e-3, ..Td3Config::default() }
}

pub fn toy_ppo_config() -> PpoConfig {
    PpoConfig {
        gamma: 0.95,
        rollout: 512,
        minibatch: 64,
        epochs: 10,
        lr: 5e-3,
        anneal_updates: 40,
        log_std_init: 0.0,
        ..PpoConfig::default()
    }
}

pub fn train_td3(seed: u64, steps: u64, cfg: Td3Config) -> Result<Td3Agent, AgentError> {
    let bounds = ResidualBounds(vec![TOY_LIMIT]);
    let mut agent = Td3Agent::new(TOY_OBS_DIM, bounds, vec![TOY_LIMIT], cfg, seed)?;
    let mut episode = 0;
    let mut env = PointReach::reset(training_episode_seed(seed, episode));
    for t in 0..steps {
        let obs = env.observe();
        let a = if t < agent.config.warmup_steps { agent.random_action() } else { agent.act(&obs, true)? };
        let s = env.step(a[0]);
        agent.store(Transition {
            obs: obs.to_vec(),
            base: vec![0.0],
            residual: a,
            reward: s.reward,
            next_obs: env.observe().to_vec(),
            next_base: vec![0.0],
            done: s.done,
            truncated: s.truncated,
        });
        if t >= agent.config.warmup_steps {
            for _ in 0..agent.config.updates_per_step {
                agent.update()?;
            }
        }
        if s.done || s.truncated {
            episode += 1;
            env = PointReach::reset(training_episode_seed(seed, episode));
        }
    }
    Ok(agent)
}

pub fn train_ppo(seed: u64, steps: u64, cfg: PpoConfig) -> Result<PpoAgent, AgentError> {
    let bounds = ResidualBounds(vec![TOY_LIMIT]);
    let mut agent = PpoAgent::new(TOY_OBS_DIM, bounds, cfg, seed)?;
    let mut episode = 0;
    let mut env = PointReach::reset(training_episode_seed(seed, episode));
    for _ in 0..steps {
        let obs = env.observe();
        let st = agent.step(&obs, true)?;
        let s = env.step(st.residual[0]);
        let next_value = agent.value(&env.observe())?;
        agent.store(PpoSample {
            obs: obs.to_vec(),
            u: st.u,
            log_prob: st.log_prob,
            value: st.value,
            reward: s.reward,
            next_value,
            done: s.done,
            truncated: s.truncated,
        });
        if agent.rollout_full() {
            agent.update()?;
        }
        if s.done || s.truncated {
            episode += 1;
            env = PointReach::reset(training_episode_seed(seed, episode));
        }
    }
    Ok(agent)
}

/// Fraction of evaluation episodes in which `policy` reaches the goal.
pub fn evaluate(seed: u64, episodes: u64, mut policy: impl FnMut(&[f64]) -> Result<f64, AgentError>) -> Result<f64, AgentError> {
    let mut wins = 0;
    for k in 0..episodes {
        let mut env = PointReach::reset(eval_episode_seed(seed, k));
        loop {
            let s = env.step(policy(&env.observe())?);
            if s.success {
                wins += 1;
            }
            if s.done || s.truncated {
                break;
            }
        }
    }
    Ok(wins as f64 / episodes as f64)
}

pub fn td3_success(seed: u64, steps: u64, episodes: u64) -> Result<f64, AgentError> {
    let mut agent = train_td3(seed, steps, toy_td3_config())?;
    evaluate(seed, episodes, |o| Ok(agent.act(o, false)?[0]))
}

pub fn ppo_success(seed: u64, steps: u64, episodes: u64) -> Result<f64, AgentError> {
    let mut agent = train_ppo(seed, steps, toy_ppo_config())?;
    evaluate(seed, episodes, |o| Ok(agent.act(o, false)?[0]))
}
