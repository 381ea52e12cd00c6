//! The training loop: plan, per-episode mode selection, residual execution,
//! reward combination, agent updates and periodic evaluation.

mod agent;
mod config;
mod trainer;

pub use agent::{Agent, Decision, Experience};
pub use config::{Algorithm, EnvOverrides, ExperimentConfig, Guidance};
pub use trainer::{
    check_plan, run_fixed_modes, EpisodeRecord, EvalReport, ExploreRow, MetricsRow, SelectionRecord, Trainer,
    VALUE_EMA,
};

use alloc::string::String;

use crate::agents::AgentError;
use crate::env::EnvError;
use crate::explore::ExploreError;
use crate::nn::NnError;
use crate::planner::PlanError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("plan does not match the scene: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Agent(AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error("non-finite value at env step {step}: {detail}")]
    NonFinite { step: u64, detail: String },
    #[error("{0}")]
    Callback(String),
}

impl From<AgentError> for HarnessError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Nn(NnError::NonFiniteGradient { index, value }) => HarnessError::NonFinite {
                step: 0,
                detail: alloc::format!("gradient {value} at parameter {index}"),
            },
            e => HarnessError::Agent(e),
        }
    }
}

impl From<PlanError> for HarnessError {
    fn from(e: PlanError) -> Self {
        HarnessError::PlanMismatch(alloc::format!("{e}"))
    }
}

/// Per-step reward: dense intrinsic term plus the sparse environment term.
pub fn combine_reward(r_in: f64, r_ex: f64) -> f64 {
    r_in + r_ex
}

/// Source of the wall-clock column in metrics rows.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Always reports zero, which keeps metrics bit-reproducible.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroClock;

impl Clock for ZeroClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests;
