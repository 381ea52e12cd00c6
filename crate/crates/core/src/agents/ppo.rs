use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_len, widths, AgentError, ResidualBounds};
use crate::nn::{Activation, Adam, AdamConfig, Mlp};
use crate::rng::{streams, CounterRng};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: u32,
    pub rollout: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    /// Linearly anneal the learning rate to zero over this many updates; 0 keeps it constant.
    pub anneal_updates: u64,
    pub max_grad_norm: f64,
    pub log_std_init: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            rollout: 2048,
            minibatch: 256,
            entropy_coef: 0.001,
            value_coef: 0.5,
            lr: 3e-4,
            anneal_updates: 0,
            max_grad_norm: 0.5,
            log_std_init: -0.5,
            log_std_min: -5.0,
            log_std_max: 0.5,
            hidden: vec![64, 64],
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return Err(AgentError::Config("gamma and lambda must lie in [0, 1]"));
        }
        if !(self.clip > 0.0) {
            return Err(AgentError::Config("clip ratio must be positive"));
        }
        if self.epochs == 0 || self.rollout == 0 || self.minibatch == 0 {
            return Err(AgentError::Config("epochs, rollout and minibatch must be positive"));
        }
        if !(self.lr > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(AgentError::Config("learning rate and gradient clip must be positive"));
        }
        if !(self.log_std_min < self.log_std_max)
            || !(self.log_std_min..=self.log_std_max).contains(&self.log_std_init)
        {
            return Err(AgentError::Config("log-std bounds must bracket the initial value"));
        }
        if self.hidden.contains(&0) {
            return Err(AgentError::Config("hidden widths must be positive"));
        }
        Ok(())
    }
}

/// Generalized advantage estimates and returns.
///
/// `next_values[t]` is `V(s_{t+1})`. `dones[t]` stops bootstrapping;
/// `ends[t]` (done or truncated) stops the advantage recursion.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    dones: &[bool],
    ends: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let cont = if ends[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_values[t] - values[t];
        next = delta + gamma * lambda * cont * next;
        adv[t] = next;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// One stored on-policy step. `u` is the pre-clip sample in bound units.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoSample {
    pub obs: Vec<f64>,
    pub u: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub next_value: f64,
    pub done: bool,
    pub truncated: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBuffer {
    pub samples: Vec<PpoSample>,
}

/// Result of sampling the policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoStep {
    pub residual: Vec<f64>,
    pub u: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpoLosses {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Gaussian policy with a tanh mean (in bound units) and state-independent log-std.
#[derive(Clone, Debug)]
pub struct PpoAgent {
    pub config: PpoConfig,
    pub obs_dim: usize,
    pub bounds: ResidualBounds,
    pub actor: Mlp,
    pub log_std: Vec<f64>,
    pub value_net: Mlp,
    pub actor_opt: Adam,
    pub value_opt: Adam,
    pub rollout: RolloutBuffer,
    pub updates: u64,
    pub noise_rng: CounterRng,
    pub minibatch_rng: CounterRng,
}

fn log_prob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..u.len() {
        let z = (u[k] - mean[k]) * libm::exp(-log_std[k]);
        s += -0.5 * z * z - log_std[k] - HALF_LN_2PI;
    }
    s
}

fn clip_grad(g: &mut [f64], max_norm: f64) {
    let norm = libm::sqrt(g.iter().map(|x| x * x).sum::<f64>());
    if norm > max_norm {
        let s = max_norm / norm;
        for x in g {
            *x *= s;
        }
    }
}

impl PpoAgent {
    pub fn new(obs_dim: usize, bounds: ResidualBounds, config: PpoConfig, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        if bounds.0.iter().any(|b| !(*b > 0.0)) || bounds.is_empty() {
            return Err(AgentError::Config("residual bounds must be positive"));
        }
        let ad = bounds.len();
        let mut init = CounterRng::new(seed, streams::INIT);
        let actor = Mlp::glorot(&widths(obs_dim, &config.hidden, ad), Activation::Tanh, &mut init);
        let value_net = Mlp::glorot(&widths(obs_dim, &config.hidden, 1), Activation::Identity, &mut init);
        let opt = AdamConfig { lr: config.lr, ..Default::default() };
        Ok(PpoAgent {
            obs_dim,
            log_std: vec![config.log_std_init; ad],
            actor_opt: Adam::new(opt, actor.param_count() + ad),
            value_opt: Adam::new(opt, value_net.param_count()),
            actor,
            value_net,
            bounds,
            rollout: RolloutBuffer::default(),
            updates: 0,
            noise_rng: CounterRng::new(seed, streams::EXPLORATION_NOISE),
            minibatch_rng: CounterRng::new(seed, streams::MINIBATCH),
            config,
        })
    }

    pub fn act_dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64, AgentError> {
        check_len(obs, self.obs_dim)?;
        Ok(self.value_net.forward(obs)?[0])
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        check_len(obs, self.obs_dim)?;
        Ok(self.actor.forward(obs)?)
    }

    /// Samples (or, without exploration, takes the mean of) the policy.
    pub fn step(&mut self, obs: &[f64], explore: bool) -> Result<PpoStep, AgentError> {
        let mean = self.mean(obs)?;
        let u: Vec<f64> = if explore {
            mean.iter().zip(&self.log_std).map(|(m, s)| m + libm::exp(*s) * self.noise_rng.normal()).collect()
        } else {
            mean.clone()
        };
        let lp = log_prob(&u, &mean, &self.log_std);
        let mut residual: Vec<f64> = u.iter().zip(&self.bounds.0).map(|(x, b)| x * b).collect();
        self.bounds.clip(&mut residual);
        Ok(PpoStep { residual, u, log_prob: lp, value: self.value(obs)? })
    }

    pub fn act(&mut self, obs: &[f64], explore: bool) -> Result<Vec<f64>, AgentError> {
        Ok(self.step(obs, explore)?.residual)
    }

    pub fn goal_value(&self, obs: &[f64]) -> Result<f64, AgentError> {
        self.value(obs)
    }

    pub fn store(&mut self, s: PpoSample) {
        self.rollout.samples.push(s);
    }

    pub fn rollout_full(&self) -> bool {
        self.rollout.samples.len() >= self.config.rollout
    }

    /// Gradient of the clipped surrogate `mean(min(ρA, clip(ρ)A))` with
    /// respect to the actor parameters followed by the log-std entries.
    pub fn surrogate_gradient(
        &self,
        obs: &[f64],
        u: &[f64],
        old_log_prob: &[f64],
        adv: &[f64],
        n: usize,
    ) -> Result<(f64, Vec<f64>), AgentError> {
        let ad = self.act_dim();
        let cache = self.actor.forward_batch(obs, n)?;
        let mean = cache.output();
        let eps = self.config.clip;
        let mut obj = 0.0;
        let mut up = vec![0.0; n * ad];
        let mut g_std = vec![0.0; ad];
        for i in 0..n {
            let m = &mean[i * ad..(i + 1) * ad];
            let ui = &u[i * ad..(i + 1) * ad];
            let ratio = libm::exp(log_prob(ui, m, &self.log_std) - old_log_prob[i]);
            let a = adv[i];
            let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
            obj += (ratio * a).min(clipped * a) / n as f64;
            let active = if a >= 0.0 { ratio <= 1.0 + eps } else { ratio >= 1.0 - eps };
            if !active {
                continue;
            }
            let w = ratio * a / n as f64;
            for k in 0..ad {
                let inv_var = libm::exp(-2.0 * self.log_std[k]);
                let d = ui[k] - m[k];
                up[i * ad + k] = w * d * inv_var;
                g_std[k] += w * (d * d * inv_var - 1.0);
            }
        }
        let mut g = vec![0.0; self.actor.param_count()];
        self.actor.backward_batch(&cache, &up, &mut g, false)?;
        g.extend_from_slice(&g_std);
        Ok((obj, g))
    }

    /// Runs the clipped-objective update on the stored rollout and clears it.
    pub fn update(&mut self) -> Result<Option<PpoLosses>, AgentError> {
        let samples = core::mem::take(&mut self.rollout.samples);
        if samples.is_empty() {
            log::warn!("ppo update skipped: empty rollout");
            return Ok(None);
        }
        let n = samples.len();
        let (od, ad) = (self.obs_dim, self.act_dim());
        if self.config.anneal_updates > 0 {
            let frac = 1.0 - (self.updates as f64 / self.config.anneal_updates as f64).min(1.0);
            self.actor_opt.config.lr = self.config.lr * frac;
            self.value_opt.config.lr = self.config.lr * frac;
        }
        self.updates += 1;
        let rewards: Vec<f64> = samples.iter().map(|s| s.reward).collect();
        let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
        let next_values: Vec<f64> = samples.iter().map(|s| s.next_value).collect();
        let dones: Vec<bool> = samples.iter().map(|s| s.done).collect();
        let ends: Vec<bool> = samples.iter().map(|s| s.done || s.truncated).collect();
        let (mut adv, ret) = gae(&rewards, &values, &next_values, &dones, &ends, self.config.gamma, self.config.lambda);
        let mean = adv.iter().sum::<f64>() / n as f64;
        let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let sd = libm::sqrt(var) + 1e-8;
        for a in &mut adv {
            *a = (*a - mean) / sd;
        }

        let mb = self.config.minibatch.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut last = PpoLosses { policy: 0.0, value: 0.0, entropy: 0.0 };
        for _ in 0..self.config.epochs {
            for i in (1..n).rev() {
                let j = self.minibatch_rng.below(i + 1);
                order.swap(i, j);
            }
            for chunk in order.chunks(mb) {
                let m = chunk.len();
                let mut obs = Vec::with_capacity(m * od);
                let mut u = Vec::with_capacity(m * ad);
                let mut old = Vec::with_capacity(m);
                let mut a = Vec::with_capacity(m);
                let mut r = Vec::with_capacity(m);
                for &i in chunk {
                    obs.extend_from_slice(&samples[i].obs);
                    u.extend_from_slice(&samples[i].u);
                    old.push(samples[i].log_prob);
                    a.push(adv[i]);
                    r.push(ret[i]);
                }
                let (obj, mut g) = self.surrogate_gradient(&obs, &u, &old, &a, m)?;
                let entropy: f64 = self.log_std.iter().map(|s| s + 0.5 + HALF_LN_2PI).sum();
                let pc = self.actor.param_count();
                for k in 0..ad {
                    g[pc + k] += self.config.entropy_coef;
                }
                for x in &mut g {
                    *x = -*x;
                }
                clip_grad(&mut g, self.config.max_grad_norm);
                let mut params: Vec<f64> = self.actor.params().to_vec();
                params.extend_from_slice(&self.log_std);
                self.actor_opt.step(&mut params, &g)?;
                self.actor.params_mut().copy_from_slice(&params[..pc]);
                for (k, s) in self.log_std.iter_mut().enumerate() {
                    *s = params[pc + k].clamp(self.config.log_std_min, self.config.log_std_max);
                }

                let vc = self.value_net.forward_batch(&obs, m)?;
                let mut vl = 0.0;
                let mut up = vec![0.0; m];
                for i in 0..m {
                    let e = vc.output()[i] - r[i];
                    vl += 0.5 * e * e / m as f64;
                    up[i] = self.config.value_coef * e / m as f64;
                }
                let mut gv = vec![0.0; self.value_net.param_count()];
                self.value_net.backward_batch(&vc, &up, &mut gv, false)?;
                clip_grad(&mut gv, self.config.max_grad_norm);
                self.value_opt.step(self.value_net.params_mut(), &gv)?;
                last = PpoLosses { policy: -obj, value: vl, entropy };
            }
        }
        Ok(Some(last))
    }
}
