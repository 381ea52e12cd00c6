use alloc::vec::Vec;

use super::{Algorithm, ExperimentConfig, HarnessError};
use crate::agents::{AgentError, PpoAgent, PpoSample, ResidualBounds, Td3Agent, Transition};
use crate::env::{TaskSpec, OBS_DIM};

/// The residual learner behind a run.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Agent {
    Td3(Td3Agent),
    Ppo(PpoAgent),
}

/// What the learner needs to remember about an action it just took.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub residual: Vec<f64>,
    pub ppo: Option<(Vec<f64>, f64, f64)>,
}

/// One environment step, in the agent-agnostic form the trainer produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub obs: Vec<f64>,
    pub base: Vec<f64>,
    pub decision: Decision,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub next_base: Vec<f64>,
    pub done: bool,
    pub truncated: bool,
}

impl Agent {
    pub fn new(cfg: &ExperimentConfig, task: &TaskSpec) -> Result<Agent, HarnessError> {
        let bounds = ResidualBounds::from_limits(&task.limits, cfg.bound_fraction());
        let scale = task.limits.as_action_scale().to_vec();
        Ok(match cfg.algorithm {
            Algorithm::Td3 => Agent::Td3(Td3Agent::new(OBS_DIM, bounds, scale, cfg.td3.clone(), cfg.seed)?),
            Algorithm::Ppo => Agent::Ppo(PpoAgent::new(OBS_DIM, bounds, cfg.ppo.clone(), cfg.seed)?),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Agent::Td3(_) => Algorithm::Td3,
            Agent::Ppo(_) => Algorithm::Ppo,
        }
    }

    pub fn bounds(&self) -> &ResidualBounds {
        match self {
            Agent::Td3(a) => &a.bounds,
            Agent::Ppo(a) => &a.bounds,
        }
    }

    /// Exploratory residual; TD3 acts uniformly at random during warmup.
    pub fn act_train(&mut self, obs: &[f64], env_step: u64) -> Result<Decision, AgentError> {
        match self {
            Agent::Td3(a) => {
                let residual = if env_step < a.config.warmup_steps { a.random_action() } else { a.act(obs, true)? };
                Ok(Decision { residual, ppo: None })
            }
            Agent::Ppo(a) => {
                let s = a.step(obs, true)?;
                Ok(Decision { residual: s.residual, ppo: Some((s.u, s.log_prob, s.value)) })
            }
        }
    }

    /// Deterministic residual; leaves every generator untouched.
    pub fn act_eval(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        match self {
            Agent::Td3(a) => {
                let mut r = a.policy(obs)?;
                a.bounds.clip(&mut r);
                Ok(r)
            }
            Agent::Ppo(a) => {
                let mut r: Vec<f64> = a.mean(obs)?.iter().zip(&a.bounds.0).map(|(m, b)| m * b).collect();
                a.bounds.clip(&mut r);
                Ok(r)
            }
        }
    }

    pub fn goal_value(&self, obs: &[f64], base: &[f64]) -> Result<f64, AgentError> {
        match self {
            Agent::Td3(a) => a.goal_value(obs, base),
            Agent::Ppo(a) => a.goal_value(obs),
        }
    }

    /// Stores the step and runs whatever updates are due. Returns the losses of
    /// the last update, if any ran.
    pub fn record(&mut self, x: Experience, env_step: u64) -> Result<Option<[f64; 2]>, AgentError> {
        match self {
            Agent::Td3(a) => {
                a.store(Transition {
                    obs: x.obs,
                    base: x.base,
                    residual: x.decision.residual,
                    reward: x.reward,
                    next_obs: x.next_obs,
                    next_base: x.next_base,
                    done: x.done,
                    truncated: x.truncated,
                });
                let mut out = None;
                if env_step >= a.config.warmup_steps {
                    for _ in 0..a.config.updates_per_step {
                        if let Some(l) = a.update()? {
                            out = Some([l.critic, l.actor.unwrap_or(0.0)]);
                        }
                    }
                }
                Ok(out)
            }
            Agent::Ppo(a) => {
                let (u, log_prob, value) = x.decision.ppo.ok_or(AgentError::Config("ppo step without sample data"))?;
                let next_value = a.value(&x.next_obs)?;
                a.store(PpoSample {
                    obs: x.obs,
                    u,
                    log_prob,
                    value,
                    reward: x.reward,
                    next_value,
                    done: x.done,
                    truncated: x.truncated,
                });
                if a.rollout_full() {
                    return Ok(a.update()?.map(|l| [l.policy, l.value]));
                }
                Ok(None)
            }
        }
    }
}
