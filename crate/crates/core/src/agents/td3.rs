use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_len, widths, AgentError, Batch, ReplayBuffer, ResidualBounds, Transition};
use crate::nn::{Activation, Adam, AdamConfig, Mlp};
use crate::rng::{streams, CounterRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u32,
    /// Exploration noise standard deviation as a fraction of the residual bound.
    pub act_noise: f64,
    /// Target-policy smoothing noise, fraction of the bound.
    pub target_noise: f64,
    /// Clip for the smoothing noise, fraction of the bound.
    pub target_noise_clip: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub warmup_steps: u64,
    pub updates_per_step: u32,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden: Vec<usize>,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            act_noise: 0.1,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            buffer_capacity: 100_000,
            batch_size: 256,
            warmup_steps: 1000,
            updates_per_step: 1,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            hidden: vec![64, 64],
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err(AgentError::Config("gamma must lie in [0, 1]"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(AgentError::Config("tau must lie in (0, 1]"));
        }
        if self.policy_delay == 0 {
            return Err(AgentError::Config("policy_delay must be at least 1"));
        }
        if !(self.act_noise >= 0.0 && self.target_noise >= 0.0 && self.target_noise_clip >= 0.0) {
            return Err(AgentError::Config("noise scales must be non-negative"));
        }
        if self.buffer_capacity == 0 || self.batch_size == 0 {
            return Err(AgentError::Config("buffer capacity and batch size must be positive"));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(AgentError::Config("learning rates must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(AgentError::Config("hidden widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Td3Losses {
    pub critic: f64,
    pub actor: Option<f64>,
}

/// TD3 over residual actions.
///
/// The critics score the composed action `base + residual`, divided
/// component-wise by `action_scale`, concatenated after the observation.
#[derive(Clone, Debug)]
pub struct Td3Agent {
    pub config: Td3Config,
    pub obs_dim: usize,
    pub bounds: ResidualBounds,
    pub action_scale: Vec<f64>,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub actor_opt: Adam,
    pub q1_opt: Adam,
    pub q2_opt: Adam,
    pub replay: ReplayBuffer,
    pub updates: u64,
    pub noise_rng: CounterRng,
    pub target_rng: CounterRng,
    pub replay_rng: CounterRng,
    pub warmup_rng: CounterRng,
}

impl Td3Agent {
    pub fn new(
        obs_dim: usize,
        bounds: ResidualBounds,
        action_scale: Vec<f64>,
        config: Td3Config,
        seed: u64,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        bounds.validate(&action_scale)?;
        let act_dim = bounds.len();
        let mut init = CounterRng::new(seed, streams::INIT);
        let actor = Mlp::glorot(&widths(obs_dim, &config.hidden, act_dim), Activation::Tanh, &mut init);
        let cw = widths(obs_dim + act_dim, &config.hidden, 1);
        let q1 = Mlp::glorot(&cw, Activation::Identity, &mut init);
        let q2 = Mlp::glorot(&cw, Activation::Identity, &mut init);
        let actor_opt = Adam::new(AdamConfig { lr: config.actor_lr, ..Default::default() }, actor.param_count());
        let q_cfg = AdamConfig { lr: config.critic_lr, ..Default::default() };
        Ok(Td3Agent {
            obs_dim,
            action_scale,
            actor_target: actor.clone(),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1_opt: Adam::new(q_cfg, q1.param_count()),
            q2_opt: Adam::new(q_cfg, q2.param_count()),
            actor,
            q1,
            q2,
            actor_opt,
            replay: ReplayBuffer::new(config.buffer_capacity),
            updates: 0,
            noise_rng: CounterRng::new(seed, streams::EXPLORATION_NOISE),
            target_rng: CounterRng::new(seed, streams::TARGET_NOISE),
            replay_rng: CounterRng::new(seed, streams::REPLAY),
            warmup_rng: CounterRng::new(seed, streams::WARMUP),
            bounds,
            config,
        })
    }

    pub fn act_dim(&self) -> usize {
        self.bounds.len()
    }

    /// Deterministic residual `π(obs)`, already scaled to the bounds.
    pub fn policy(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        check_len(obs, self.obs_dim)?;
        let mut a = self.actor.forward(obs)?;
        for (x, b) in a.iter_mut().zip(&self.bounds.0) {
            *x *= b;
        }
        Ok(a)
    }

    pub fn act(&mut self, obs: &[f64], explore: bool) -> Result<Vec<f64>, AgentError> {
        let mut a = self.policy(obs)?;
        if explore {
            for (x, b) in a.iter_mut().zip(&self.bounds.0) {
                *x += self.config.act_noise * b * self.noise_rng.normal();
            }
        }
        self.bounds.clip(&mut a);
        Ok(a)
    }

    /// Uniform residual for the warmup phase.
    pub fn random_action(&mut self) -> Vec<f64> {
        let bounds = self.bounds.0.clone();
        bounds.iter().map(|b| self.warmup_rng.uniform_range(-b, *b)).collect()
    }

    fn critic_input(&self, obs: &[f64], action: &[f64], n: usize) -> Vec<f64> {
        let (od, ad) = (self.obs_dim, self.act_dim());
        let mut x = Vec::with_capacity(n * (od + ad));
        for i in 0..n {
            x.extend_from_slice(&obs[i * od..(i + 1) * od]);
            for k in 0..ad {
                x.push(action[i * ad + k] / self.action_scale[k]);
            }
        }
        x
    }

    /// `min(Q₁, Q₂)` at the composed action `base + π(obs)`.
    pub fn goal_value(&self, obs: &[f64], base: &[f64]) -> Result<f64, AgentError> {
        let res = self.policy(obs)?;
        let a: Vec<f64> = base.iter().zip(&res).map(|(b, r)| b + r).collect();
        let x = self.critic_input(obs, &a, 1);
        Ok(self.q1.forward(&x)?[0].min(self.q2.forward(&x)?[0]))
    }

    pub fn q_values(&self, obs: &[f64], action: &[f64]) -> Result<(f64, f64), AgentError> {
        let x = self.critic_input(obs, action, 1);
        Ok((self.q1.forward(&x)?[0], self.q2.forward(&x)?[0]))
    }

    pub fn store(&mut self, t: Transition) {
        self.replay.push(t);
    }

    /// TD targets for `batch` given standard-normal smoothing noise (`len × act_dim`).
    pub fn compute_targets(&self, batch: &Batch, noise: &[f64]) -> Result<Vec<f64>, AgentError> {
        let (n, ad) = (batch.len, self.act_dim());
        let pi = self.actor_target.forward_batch(&batch.next_obs, n)?;
        let pi = pi.output();
        let mut a = vec![0.0; n * ad];
        for i in 0..n {
            for k in 0..ad {
                let b = self.bounds.0[k];
                let c = self.config.target_noise_clip * b;
                let eps = (self.config.target_noise * b * noise[i * ad + k]).clamp(-c, c);
                let r = (pi[i * ad + k] * b + eps).clamp(-b, b);
                a[i * ad + k] = batch.next_base[i * ad + k] + r;
            }
        }
        let x = self.critic_input(&batch.next_obs, &a, n);
        let t1 = self.q1_target.forward_batch(&x, n)?;
        let t2 = self.q2_target.forward_batch(&x, n)?;
        Ok((0..n)
            .map(|i| {
                let q = t1.output()[i].min(t2.output()[i]);
                batch.reward[i] + self.config.gamma * (1.0 - batch.done[i]) * q
            })
            .collect())
    }

    /// One critic step on a sampled batch; actor and targets every `policy_delay` calls.
    pub fn update(&mut self) -> Result<Option<Td3Losses>, AgentError> {
        if self.replay.is_empty() {
            log::warn!("td3 update skipped: replay buffer is empty");
            return Ok(None);
        }
        let batch = self.replay.sample(self.config.batch_size, &mut self.replay_rng);
        self.update_on(&batch).map(Some)
    }

    pub fn update_on(&mut self, batch: &Batch) -> Result<Td3Losses, AgentError> {
        let (n, ad) = (batch.len, self.act_dim());
        let noise: Vec<f64> = (0..n * ad).map(|_| self.target_rng.normal()).collect();
        let y = self.compute_targets(batch, &noise)?;

        let a: Vec<f64> = batch.base.iter().zip(&batch.residual).map(|(b, r)| b + r).collect();
        let x = self.critic_input(&batch.obs, &a, n);
        let mut critic_loss = 0.0;
        for (net, opt) in [(&mut self.q1, &mut self.q1_opt), (&mut self.q2, &mut self.q2_opt)] {
            let cache = net.forward_batch(&x, n)?;
            let q = cache.output();
            let mut up = vec![0.0; n];
            for i in 0..n {
                let e = q[i] - y[i];
                critic_loss += 0.5 * e * e / n as f64;
                up[i] = e / n as f64;
            }
            let mut g = vec![0.0; net.param_count()];
            net.backward_batch(&cache, &up, &mut g, false)?;
            opt.step(net.params_mut(), &g)?;
        }
        self.updates += 1;

        let mut actor_loss = None;
        if self.updates.is_multiple_of(self.config.policy_delay as u64) {
            let pc = self.actor.forward_batch(&batch.obs, n)?;
            let u = pc.output();
            let mut a = vec![0.0; n * ad];
            for i in 0..n {
                for k in 0..ad {
                    a[i * ad + k] = batch.base[i * ad + k] + u[i * ad + k] * self.bounds.0[k];
                }
            }
            let x = self.critic_input(&batch.obs, &a, n);
            let qc = self.q1.forward_batch(&x, n)?;
            actor_loss = Some(-qc.output().iter().sum::<f64>() / n as f64);
            let up = vec![-1.0 / n as f64; n];
            let mut scratch = vec![0.0; self.q1.param_count()];
            let gx = self.q1.backward_batch(&qc, &up, &mut scratch, true)?.expect("input gradient");
            let od = self.obs_dim;
            let mut gu = vec![0.0; n * ad];
            for i in 0..n {
                for k in 0..ad {
                    gu[i * ad + k] = gx[i * (od + ad) + od + k] * self.bounds.0[k] / self.action_scale[k];
                }
            }
            let mut g = vec![0.0; self.actor.param_count()];
            self.actor.backward_batch(&pc, &gu, &mut g, false)?;
            self.actor_opt.step(self.actor.params_mut(), &g)?;

            let tau = self.config.tau;
            self.actor_target.polyak_from(&self.actor, tau);
            self.q1_target.polyak_from(&self.q1, tau);
            self.q2_target.polyak_from(&self.q2, tau);
        }
        Ok(Td3Losses { critic: critic_loss, actor: actor_loss })
    }
}
