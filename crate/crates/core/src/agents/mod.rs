//! Goal-conditioned residual agents: TD3 and PPO.
//!
//! Agents see flat observations and act in residual space, one component per
//! action dimension, bounded by [`ResidualBounds`].

mod ppo;
mod replay;
mod td3;
pub mod toy;

pub use ppo::{gae, PpoAgent, PpoConfig, PpoLosses, PpoSample, PpoStep, RolloutBuffer};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use td3::{Td3Agent, Td3Config, Td3Losses};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::StepLimits;
use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid agent config: {0}")]
    Config(&'static str),
    #[error("observation has length {found}, agent expects {expected}")]
    ObservationLength { expected: usize, found: usize },
}

/// Per-component maximum residual magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualBounds(pub Vec<f64>);

impl ResidualBounds {
    /// `fraction` of the environment step limits, in action layout.
    pub fn from_limits(limits: &StepLimits, fraction: f64) -> Self {
        ResidualBounds(limits.as_action_scale().iter().map(|l| l * fraction).collect())
    }

    pub fn validate(&self, limits: &[f64]) -> Result<(), AgentError> {
        if self.0.len() != limits.len() {
            return Err(AgentError::Config("residual bound length differs from action size"));
        }
        for (b, l) in self.0.iter().zip(limits) {
            if !(*b > 0.0 && b.is_finite()) {
                return Err(AgentError::Config("residual bounds must be positive"));
            }
            if b > l {
                return Err(AgentError::Config("residual bound exceeds the step limit"));
            }
        }
        Ok(())
    }

    pub fn clip(&self, a: &mut [f64]) {
        for (x, b) in a.iter_mut().zip(&self.0) {
            *x = x.clamp(-b, *b);
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

pub(crate) fn check_len(obs: &[f64], expected: usize) -> Result<(), AgentError> {
    if obs.len() != expected {
        return Err(AgentError::ObservationLength { expected, found: obs.len() });
    }
    Ok(())
}
