use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::{PpoConfig, Td3Config};
use crate::control::{PrimitiveController, TerminationRule};
use crate::env::{RewardConstants, TaskId, TaskSpec};
use crate::explore::SelectionConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Td3,
    Ppo,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Td3 => "td3",
            Algorithm::Ppo => "ppo",
        }
    }
}

impl core::str::FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "td3" => Ok(Algorithm::Td3),
            "ppo" => Ok(Algorithm::Ppo),
            _ => Err(HarnessError::Config(alloc::format!("unknown algorithm `{s}` (expected td3 or ppo)"))),
        }
    }
}

/// Ablation switches. All on is the full method; all off is the sparse-reward control.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Guidance {
    pub base_policy: bool,
    pub intrinsic_reward: bool,
    pub exploration: bool,
}

impl Default for Guidance {
    fn default() -> Self {
        Guidance { base_policy: true, intrinsic_reward: true, exploration: true }
    }
}

impl Guidance {
    pub const OFF: Guidance = Guidance { base_policy: false, intrinsic_reward: false, exploration: false };
}

/// Optional overrides of the scene's environment constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvOverrides {
    pub max_episode_steps: Option<u32>,
    pub success_reward: Option<f64>,
    pub collision_penalty: Option<f64>,
}

impl EnvOverrides {
    pub fn apply(&self, spec: &mut TaskSpec) {
        if let Some(n) = self.max_episode_steps {
            spec.max_episode_steps = n;
        }
        let r: &mut RewardConstants = &mut spec.rewards;
        if let Some(v) = self.success_reward {
            r.success_reward = v;
        }
        if let Some(v) = self.collision_penalty {
            r.collision_penalty = v;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskId,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: u64,
    /// Residual bound as a fraction of the environment step limits (full limits without a base policy).
    pub residual_fraction: f64,
    /// Steps a primitive may run before the episode is ended as a failure.
    pub primitive_budget: u32,
    pub guidance: Guidance,
    pub env: EnvOverrides,
    pub controller: PrimitiveController,
    pub termination: TerminationRule,
    pub selection: SelectionConfig,
    pub td3: Td3Config,
    pub ppo: PpoConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: TaskId::PickCubeMini,
            algorithm: Algorithm::Td3,
            seed: 0,
            total_steps: 50_000,
            eval_interval: 5_000,
            eval_episodes: 20,
            residual_fraction: 0.5,
            primitive_budget: 100,
            guidance: Guidance::default(),
            env: EnvOverrides::default(),
            controller: PrimitiveController::default(),
            termination: TerminationRule::default(),
            selection: SelectionConfig::default(),
            td3: Td3Config::default(),
            ppo: PpoConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(task: TaskId, algorithm: Algorithm, seed: u64) -> Self {
        ExperimentConfig { task, algorithm, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.eval_interval == 0 {
            return bad("eval_interval must be positive");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive");
        }
        if !(self.residual_fraction > 0.0 && self.residual_fraction <= 1.0) {
            return bad("residual_fraction must lie in (0, 1]");
        }
        if self.primitive_budget == 0 {
            return bad("primitive_budget must be positive");
        }
        if self.env.max_episode_steps == Some(0) {
            return bad("max_episode_steps must be positive");
        }
        for v in [self.env.success_reward, self.env.collision_penalty].into_iter().flatten() {
            if !(v.is_finite() && v >= 0.0) {
                return bad("reward constants must be finite and non-negative");
            }
        }
        self.controller.validate().map_err(|m| HarnessError::Config(m.into()))?;
        self.termination.validate().map_err(|m| HarnessError::Config(m.into()))?;
        self.selection.validate().map_err(|e| HarnessError::Config(alloc::format!("{e}")))?;
        match self.algorithm {
            Algorithm::Td3 => self.td3.validate(),
            Algorithm::Ppo => self.ppo.validate(),
        }
        .map_err(|e| HarnessError::Config(alloc::format!("{e}")))
    }

    /// The built-in scene with the configured overrides applied.
    pub fn task_spec(&self) -> TaskSpec {
        let mut spec = TaskSpec::builtin(self.task);
        self.env.apply(&mut spec);
        spec
    }

    pub fn bound_fraction(&self) -> f64 {
        if self.guidance.base_policy {
            self.residual_fraction
        } else {
            1.0
        }
    }

    /// Number of metrics rows a complete run produces.
    pub fn expected_rows(&self) -> u64 {
        self.total_steps / self.eval_interval + 1
    }
}
