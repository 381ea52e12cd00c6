//! Task- and affordance-level planning.
//!
//! A plan is an ordered list of pick/transport primitives, each carrying one or
//! more symbolic affordance modes. Plans come from a three-stage prompt
//! pipeline run against an [`LlmBackend`], are validated against a small
//! grammar, and are turned into SE(3) goals by [`parse_to_goal`] at the start
//! of every primitive.

mod fixtures;
mod goal;
mod pipeline;
mod validate;

pub use fixtures::{fixture_plan, FixtureBackend};
pub use goal::{anchor_point, parse_to_goal};
pub use pipeline::{
    extract_fenced, plan_task, BackendError, LlmBackend, ObjectInfo, PlanContext, PromptSet, Stage,
    MAX_ATTEMPTS,
};
pub use validate::{
    parse_affordance_response, parse_modes_response, parse_task_response, plan_from_json,
    plan_to_json, validate_plan, PLAN_SCHEMA_VERSION,
};

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, SignedAxis, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Pick,
    Transport,
}

impl PrimitiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PrimitiveKind::Pick => "pick",
            PrimitiveKind::Transport => "transport",
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named point of a box in its own frame, plus an object-frame offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "anchor", rename_all = "snake_case")]
pub enum PositionAnchor {
    Center {
        #[serde(default)]
        offset: Vec3,
    },
    /// Center of the face whose outward normal is `axis`.
    Face {
        axis: SignedAxis,
        #[serde(default)]
        offset: Vec3,
    },
    /// Midpoint of the edge shared by the faces `axis` and `second`.
    Edge {
        axis: SignedAxis,
        second: SignedAxis,
        #[serde(default)]
        offset: Vec3,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickAffordance {
    pub description: String,
    pub position: PositionAnchor,
    /// Object axis the gripper approach (z) axis points along.
    pub ee_z_axis: SignedAxis,
    /// Object axis the fingers open along.
    pub ee_y_axis: SignedAxis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportAffordance {
    pub description: String,
    pub reference_object: String,
    /// Placement pose of the carried object in the reference object's frame.
    pub relative_pose: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AffordanceSpec {
    Pick(PickAffordance),
    Transport(TransportAffordance),
}

impl AffordanceSpec {
    pub fn description(&self) -> &str {
        match self {
            AffordanceSpec::Pick(p) => &p.description,
            AffordanceSpec::Transport(t) => &t.description,
        }
    }

    pub fn kind(&self) -> PrimitiveKind {
        match self {
            AffordanceSpec::Pick(_) => PrimitiveKind::Pick,
            AffordanceSpec::Transport(_) => PrimitiveKind::Transport,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveStep {
    pub kind: PrimitiveKind,
    pub object_id: String,
    pub affordances: Vec<AffordanceSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Fixture,
    Live,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: PlanSource,
    pub model: String,
    /// RFC 3339 UTC time of plan creation, or empty when unknown.
    pub timestamp: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub task_description: String,
    pub provenance: Provenance,
    pub steps: Vec<PrimitiveStep>,
}

impl TaskPlan {
    /// Number of backend queries the pipeline needs to produce this plan.
    pub fn query_count(&self) -> usize {
        1 + self.steps.len() + self.steps.iter().map(|s| s.affordances.len()).sum::<usize>()
    }

    pub fn mode_counts(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.affordances.len()).collect()
    }
}

/// One prompt/response pair of a pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: Stage,
    pub attempt: usize,
    pub prompt: String,
    pub response: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("{location}: unknown object id `{id}`")]
    UnknownObject { location: String, id: String },
    #[error("{location}: ee_z_axis {z} and ee_y_axis {y} are not orthogonal")]
    NonOrthogonalAxes { location: String, z: SignedAxis, y: SignedAxis },
    #[error("{location}: missing field `{field}`")]
    MissingField { location: String, field: String },
    #[error("{location}: {reason}")]
    InvalidField { location: String, reason: String },
    #[error("{location}: transport of `{object}` is not preceded by a pick of it")]
    Ordering { location: String, object: String },
    #[error("response is not valid JSON: {0}")]
    Syntax(String),
    #[error("plan validation failed after {attempts} attempts: {last}")]
    Validation { attempts: usize, last: Box<PlanError>, transcript: Vec<TranscriptEntry> },
    #[error("backend error: {0}")]
    Backend(String),
    #[error("affordance references object `{0}` that is not in the scene")]
    UnresolvedReference(String),
    #[error("prompt template slot `{0}` left unfilled")]
    UnfilledSlot(String),
    #[error("plan cache schema version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("plan cache is corrupt: {0}")]
    Corrupt(String),
}
