//! Three-stage prompt pipeline: task decomposition, modality enumeration and
//! per-mode affordance specification.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::validate::{parse_affordance_response, parse_modes_response, parse_task_response};
use super::{PlanError, PlanSource, PrimitiveKind, PrimitiveStep, Provenance, TaskPlan, TranscriptEntry};
use crate::env::TaskSpec;
use crate::geometry::Vec3;

/// Validation attempts per query before the pipeline gives up.
pub const MAX_ATTEMPTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Task,
    Modality,
    Affordance,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct BackendError(pub String);

pub trait LlmBackend {
    /// Sends one prompt and returns the raw completion text.
    fn complete(&mut self, stage: Stage, prompt: &str) -> Result<String, BackendError>;
    fn source(&self) -> PlanSource;
    fn model(&self) -> String;
    /// Creation time stamped into the plan's provenance.
    fn timestamp(&self) -> String {
        String::new()
    }
}

/// Prompt templates. Slots are written `{{name}}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptSet {
    pub task: String,
    pub modality: String,
    pub affordance: String,
    pub pick_format: String,
    pub transport_format: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            task: include_str!("../../prompts/task.txt").to_string(),
            modality: include_str!("../../prompts/modality.txt").to_string(),
            affordance: include_str!("../../prompts/affordance.txt").to_string(),
            pick_format: include_str!("../../prompts/pick_format.txt").to_string(),
            transport_format: include_str!("../../prompts/transport_format.txt").to_string(),
        }
    }
}

impl PromptSet {
    /// Fills every `{{slot}}`; a slot left over is an error.
    pub fn render(template: &str, slots: &[(&str, &str)]) -> Result<String, PlanError> {
        let mut out = template.to_string();
        for (k, v) in slots {
            out = out.replace(&format!("{{{{{k}}}}}"), v);
        }
        if let Some(start) = out.find("{{") {
            let rest = &out[start + 2..];
            let name = rest.split("}}").next().unwrap_or(rest);
            return Err(PlanError::UnfilledSlot(name.to_string()));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectInfo {
    pub id: String,
    pub half_extents: Vec3,
    pub movable: bool,
}

/// What the planner is told about the scene.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanContext {
    pub task_description: String,
    pub objects: Vec<ObjectInfo>,
}

impl PlanContext {
    pub fn from_task(task: &TaskSpec) -> Self {
        PlanContext {
            task_description: task.description.clone(),
            objects: task
                .objects
                .iter()
                .map(|o| ObjectInfo { id: o.id.clone(), half_extents: o.half_extents, movable: o.movable })
                .collect(),
        }
    }

    pub fn object_ids(&self) -> Vec<&str> {
        self.objects.iter().map(|o| o.id.as_str()).collect()
    }

    fn object_table(&self) -> String {
        let mut s = String::new();
        for o in &self.objects {
            let h = o.half_extents;
            let _ = writeln!(s, "  {} [{}, {}, {}] {}", o.id, h.x, h.y, h.z, if o.movable { "yes" } else { "no" });
        }
        s
    }
}

/// Body of the first fenced code block in `raw`, if any.
pub fn extract_fenced(raw: &str) -> Option<&str> {
    let start = raw.find("```")?;
    let after = &raw[start + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after[body_start..];
    let end = body.find("```")?;
    Some(body[..end].trim())
}

struct Session<'a> {
    backend: &'a mut dyn LlmBackend,
    transcript: Vec<TranscriptEntry>,
}

impl Session<'_> {
    fn query<T>(&mut self, stage: Stage, prompt: &str, parse: impl Fn(&str) -> Result<T, PlanError>) -> Result<T, PlanError> {
        let mut current = prompt.to_string();
        let mut last = None;
        for attempt in 1..=MAX_ATTEMPTS {
            let response = self.backend.complete(stage, &current).map_err(|e| PlanError::Backend(e.0))?;
            let result = parse(&response);
            self.transcript.push(TranscriptEntry {
                stage,
                attempt,
                prompt: current.clone(),
                response: response.clone(),
                error: result.as_ref().err().map(|e| e.to_string()),
            });
            match result {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::warn!("planner {stage:?} response rejected (attempt {attempt}): {e}");
                    current = format!(
                        "{prompt}\n\nYour previous answer was rejected: {e}\nReply again with one corrected fenced json block."
                    );
                    last = Some(e);
                }
            }
        }
        Err(PlanError::Validation {
            attempts: MAX_ATTEMPTS,
            last: alloc::boxed::Box::new(last.expect("at least one attempt")),
            transcript: core::mem::take(&mut self.transcript),
        })
    }
}

/// Runs the full pipeline: one task query, then per primitive one modality
/// query followed by one affordance query per mode.
pub fn plan_task(ctx: &PlanContext, backend: &mut dyn LlmBackend, prompts: &PromptSet) -> Result<TaskPlan, PlanError> {
    let ids = ctx.object_ids();
    let objects = ctx.object_table();
    let desc = ctx.task_description.as_str();
    let mut session = Session { backend, transcript: Vec::new() };

    let task_prompt = PromptSet::render(&prompts.task, &[("task_description", desc), ("objects", &objects)])?;
    let primitives = session.query(Stage::Task, &task_prompt, |r| parse_task_response(r, &ids))?;

    let mut steps = Vec::new();
    for (kind, object_id) in primitives {
        let primitive = format!("{kind}({object_id})");
        let slots = [("task_description", desc), ("objects", objects.as_str()), ("primitive", primitive.as_str())];
        let m_prompt = PromptSet::render(&prompts.modality, &slots)?;
        let modes = session.query(Stage::Modality, &m_prompt, parse_modes_response)?;

        let format = match kind {
            PrimitiveKind::Pick => prompts.pick_format.as_str(),
            PrimitiveKind::Transport => prompts.transport_format.as_str(),
        };
        let mut affordances = Vec::new();
        for mode in &modes {
            let p_prompt = PromptSet::render(
                &prompts.affordance,
                &[
                    ("task_description", desc),
                    ("objects", objects.as_str()),
                    ("primitive", primitive.as_str()),
                    ("mode_description", mode.as_str()),
                    ("format", format),
                ],
            )?;
            let spec = session.query(Stage::Affordance, &p_prompt, |r| parse_affordance_response(r, kind, &ids))?;
            affordances.push(spec);
        }
        steps.push(PrimitiveStep { kind, object_id, affordances });
    }

    let provenance = Provenance {
        source: session.backend.source(),
        model: session.backend.model(),
        timestamp: session.backend.timestamp(),
    };
    Ok(TaskPlan { task_description: ctx.task_description.clone(), provenance, steps })
}
