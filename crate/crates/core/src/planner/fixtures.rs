//! Canonical plans for the built-in tasks and an offline backend replaying them.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use serde_json::json;

use super::pipeline::{BackendError, LlmBackend, Stage};
use super::{
    AffordanceSpec, PickAffordance, PlanSource, PositionAnchor, PrimitiveKind, PrimitiveStep, Provenance, TaskPlan,
    TransportAffordance,
};
use crate::env::{TaskId, TaskSpec};
use crate::geometry::{Pose, Quat, SignedAxis, Vec3};

fn pick(description: &str, axis: SignedAxis, offset: Vec3, z: SignedAxis, y: SignedAxis) -> AffordanceSpec {
    AffordanceSpec::Pick(PickAffordance {
        description: description.to_string(),
        position: PositionAnchor::Face { axis, offset },
        ee_z_axis: z,
        ee_y_axis: y,
    })
}

fn place(description: &str, reference: &str, position: Vec3, orientation: Quat) -> AffordanceSpec {
    AffordanceSpec::Transport(TransportAffordance {
        description: description.to_string(),
        reference_object: reference.to_string(),
        relative_pose: Pose::new(position, orientation),
    })
}

fn step(kind: PrimitiveKind, object: &str, affordances: Vec<AffordanceSpec>) -> PrimitiveStep {
    PrimitiveStep { kind, object_id: object.to_string(), affordances }
}

/// Hand-written plan for a built-in task, in the form the pipeline would return it.
pub fn fixture_plan(task: TaskId) -> TaskPlan {
    use PrimitiveKind::{Pick, Transport};
    use SignedAxis::*;
    let steps = match task {
        TaskId::PickCubeMini => vec![
            step(Pick, "cube", vec![pick("Pick the cube from the top", PosZ, Vec3::ZERO, NegZ, NegY)]),
            step(
                Transport,
                "cube",
                vec![place("Move the cube to the goal", "goal", Vec3::ZERO, Quat::IDENTITY)],
            ),
        ],
        TaskId::PegInsertMini => vec![
            step(
                Pick,
                "peg",
                vec![
                    pick("Pick the peg from the end", PosZ, Vec3::new(0.04, 0.0, 0.0), NegZ, NegY),
                    pick("Pick the peg from the head", PosZ, Vec3::new(-0.04, 0.0, 0.0), NegZ, NegY),
                ],
            ),
            step(
                Transport,
                "peg",
                vec![place("Insert the peg into the hole", "hole", Vec3::new(-0.06, 0.0, 0.0), Quat::IDENTITY)],
            ),
        ],
        TaskId::PutBoxMini => vec![
            step(
                Pick,
                "box",
                vec![
                    pick("Pick the box from the side", NegX, Vec3::ZERO, PosX, NegY),
                    pick("Pick the box from the top", PosZ, Vec3::ZERO, NegZ, NegY),
                ],
            ),
            step(
                Transport,
                "box",
                vec![
                    place(
                        "Place the box vertically in the cupboard",
                        "cupboard",
                        Vec3::new(0.0, 0.0, -0.005),
                        Quat::IDENTITY,
                    ),
                    place(
                        "Place the box horizontally in the cupboard",
                        "cupboard",
                        Vec3::new(0.0, 0.0, -0.025),
                        Quat::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0),
                    ),
                ],
            ),
        ],
    };
    TaskPlan {
        task_description: TaskSpec::builtin(task).description,
        provenance: Provenance { source: PlanSource::Fixture, model: "fixture".to_string(), timestamp: String::new() },
        steps,
    }
}

fn fenced(v: serde_json::Value) -> String {
    format!("```json\n{}\n```", serde_json::to_string(&v).expect("json"))
}

/// Offline backend answering the pipeline's queries from a stored plan.
///
/// Responses are replayed in pipeline order; a query arriving out of order is
/// answered with an error.
#[derive(Clone, Debug)]
pub struct FixtureBackend {
    queue: VecDeque<(Stage, String, String)>,
    calls: usize,
    model: String,
}

impl FixtureBackend {
    pub fn new(plan: &TaskPlan) -> Self {
        let mut queue = VecDeque::new();
        let prims: Vec<_> = plan.steps.iter().map(|s| json!({"kind": s.kind, "object_id": s.object_id})).collect();
        queue.push_back((Stage::Task, String::new(), fenced(json!({ "primitives": prims }))));
        for s in &plan.steps {
            let modes: Vec<_> = s.affordances.iter().map(|a| a.description().to_string()).collect();
            queue.push_back((Stage::Modality, String::new(), fenced(json!({ "modes": modes }))));
            for a in &s.affordances {
                let body = serde_json::to_value(a).expect("affordance serializes");
                queue.push_back((Stage::Affordance, a.description().to_string(), fenced(body)));
            }
        }
        FixtureBackend { queue, calls: 0, model: plan.provenance.model.clone() }
    }

    /// Queries answered so far.
    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl LlmBackend for FixtureBackend {
    fn complete(&mut self, stage: Stage, prompt: &str) -> Result<String, BackendError> {
        self.calls += 1;
        let (want, needle, response) =
            self.queue.pop_front().ok_or_else(|| BackendError("fixture exhausted".to_string()))?;
        if want != stage || !prompt.contains(needle.as_str()) {
            return Err(BackendError(format!("fixture expected a {want:?} query")));
        }
        Ok(response)
    }

    fn source(&self) -> PlanSource {
        PlanSource::Fixture
    }

    fn model(&self) -> String {
        self.model.clone()
    }
}
