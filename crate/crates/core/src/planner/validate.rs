//! Grammar checks for backend responses and the plan cache format.
//!
//! Every error carries a location path such as `steps[1].affordances[0].ee_y_axis`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{Map, Value};

use super::pipeline::extract_fenced;
use super::{
    AffordanceSpec, PickAffordance, PlanError, PlanSource, PositionAnchor, PrimitiveKind, PrimitiveStep, Provenance,
    TaskPlan, TransportAffordance,
};
use crate::geometry::{Pose, Quat, SignedAxis, Vec3};

pub const PLAN_SCHEMA_VERSION: u64 = 1;

const QUAT_NORM_TOLERANCE: f64 = 1e-6;

fn join(location: &str, field: &str) -> String {
    if location.is_empty() {
        field.to_string()
    } else {
        format!("{location}.{field}")
    }
}

fn shown(location: &str) -> String {
    if location.is_empty() { "(root)".to_string() } else { location.to_string() }
}

fn invalid(location: &str, reason: impl Into<String>) -> PlanError {
    PlanError::InvalidField { location: shown(location), reason: reason.into() }
}

fn parse_json(raw: &str) -> Result<Value, PlanError> {
    let body = extract_fenced(raw).unwrap_or(raw);
    serde_json::from_str(body).map_err(|e| PlanError::Syntax(e.to_string()))
}

fn as_object<'a>(v: &'a Value, location: &str) -> Result<&'a Map<String, Value>, PlanError> {
    v.as_object().ok_or_else(|| invalid(location, "expected an object"))
}

fn field<'a>(obj: &'a Map<String, Value>, location: &str, name: &str) -> Result<&'a Value, PlanError> {
    obj.get(name).ok_or_else(|| PlanError::MissingField { location: shown(location), field: name.to_string() })
}

fn string(obj: &Map<String, Value>, location: &str, name: &str) -> Result<String, PlanError> {
    field(obj, location, name)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| invalid(&join(location, name), "expected a string"))
}

fn array<'a>(obj: &'a Map<String, Value>, location: &str, name: &str) -> Result<&'a Vec<Value>, PlanError> {
    field(obj, location, name)?.as_array().ok_or_else(|| invalid(&join(location, name), "expected an array"))
}

fn numbers<const N: usize>(v: &Value, location: &str) -> Result<[f64; N], PlanError> {
    let arr = v.as_array().filter(|a| a.len() == N).ok_or_else(|| invalid(location, format!("expected {N} numbers")))?;
    let mut out = [0.0; N];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = x.as_f64().filter(|f| f.is_finite()).ok_or_else(|| invalid(location, "expected a finite number"))?;
    }
    Ok(out)
}

fn axis(obj: &Map<String, Value>, location: &str, name: &str) -> Result<SignedAxis, PlanError> {
    let loc = join(location, name);
    let s = field(obj, location, name)?.as_str().ok_or_else(|| invalid(&loc, "expected an axis token"))?;
    s.parse().map_err(|_| invalid(&loc, format!("`{s}` is not one of +x, -x, +y, -y, +z, -z")))
}

fn known_object(id: &str, location: &str, known: Option<&[&str]>) -> Result<(), PlanError> {
    match known {
        Some(ids) if !ids.contains(&id) => {
            Err(PlanError::UnknownObject { location: location.to_string(), id: id.to_string() })
        }
        _ => Ok(()),
    }
}

fn kind(v: &Value, location: &str) -> Result<PrimitiveKind, PlanError> {
    match v.as_str() {
        Some("pick") => Ok(PrimitiveKind::Pick),
        Some("transport") => Ok(PrimitiveKind::Transport),
        _ => Err(invalid(location, "kind must be `pick` or `transport`")),
    }
}

fn offset(obj: &Map<String, Value>, location: &str) -> Result<Vec3, PlanError> {
    match obj.get("offset") {
        None => Ok(Vec3::ZERO),
        Some(v) => Ok(Vec3::from(numbers::<3>(v, &join(location, "offset"))?)),
    }
}

fn anchor(v: &Value, location: &str) -> Result<PositionAnchor, PlanError> {
    let obj = as_object(v, location)?;
    let name = string(obj, location, "anchor")?;
    let offset = offset(obj, location)?;
    match name.as_str() {
        "center" => Ok(PositionAnchor::Center { offset }),
        "face" => Ok(PositionAnchor::Face { axis: axis(obj, location, "axis")?, offset }),
        "edge" => {
            let a = axis(obj, location, "axis")?;
            let b = axis(obj, location, "second")?;
            if !a.is_orthogonal_to(b) {
                return Err(invalid(&join(location, "second"), "edge faces must be orthogonal"));
            }
            Ok(PositionAnchor::Edge { axis: a, second: b, offset })
        }
        other => Err(invalid(&join(location, "anchor"), format!("unknown anchor `{other}`"))),
    }
}

fn pose(v: &Value, location: &str) -> Result<Pose, PlanError> {
    let obj = as_object(v, location)?;
    let p = numbers::<3>(field(obj, location, "position")?, &join(location, "position"))?;
    let qloc = join(location, "orientation");
    let q = Quat::from(numbers::<4>(field(obj, location, "orientation")?, &qloc)?);
    if (q.norm() - 1.0).abs() > QUAT_NORM_TOLERANCE {
        return Err(invalid(&qloc, "quaternion is not unit length"));
    }
    Ok(Pose::new(Vec3::from(p), q))
}

fn affordance(v: &Value, location: &str, k: PrimitiveKind, known: Option<&[&str]>) -> Result<AffordanceSpec, PlanError> {
    let obj = as_object(v, location)?;
    let description = string(obj, location, "description")?;
    match k {
        PrimitiveKind::Pick => {
            let position = anchor(field(obj, location, "position")?, &join(location, "position"))?;
            let z = axis(obj, location, "ee_z_axis")?;
            let y = axis(obj, location, "ee_y_axis")?;
            if !z.is_orthogonal_to(y) {
                return Err(PlanError::NonOrthogonalAxes { location: join(location, "ee_y_axis"), z, y });
            }
            Ok(AffordanceSpec::Pick(PickAffordance { description, position, ee_z_axis: z, ee_y_axis: y }))
        }
        PrimitiveKind::Transport => {
            let reference_object = string(obj, location, "reference_object")?;
            known_object(&reference_object, &join(location, "reference_object"), known)?;
            let relative_pose = pose(field(obj, location, "relative_pose")?, &join(location, "relative_pose"))?;
            Ok(AffordanceSpec::Transport(TransportAffordance { description, reference_object, relative_pose }))
        }
    }
}

fn check_ordering(steps: &[PrimitiveStep]) -> Result<(), PlanError> {
    for (j, s) in steps.iter().enumerate() {
        if s.kind == PrimitiveKind::Transport
            && !steps[..j].iter().any(|p| p.kind == PrimitiveKind::Pick && p.object_id == s.object_id)
        {
            return Err(PlanError::Ordering { location: format!("steps[{j}]"), object: s.object_id.clone() });
        }
    }
    Ok(())
}

fn provenance(v: Option<&Value>) -> Result<Provenance, PlanError> {
    let Some(v) = v else {
        return Ok(Provenance { source: PlanSource::Fixture, model: String::new(), timestamp: String::new() });
    };
    let loc = "provenance";
    let obj = as_object(v, loc)?;
    let source = match string(obj, loc, "source")?.as_str() {
        "fixture" => PlanSource::Fixture,
        "live" => PlanSource::Live,
        _ => return Err(invalid("provenance.source", "expected `fixture` or `live`")),
    };
    Ok(Provenance { source, model: string(obj, loc, "model")?, timestamp: string(obj, loc, "timestamp")? })
}

fn plan_from_value(v: &Value, known: Option<&[&str]>) -> Result<TaskPlan, PlanError> {
    let obj = as_object(v, "")?;
    let task_description = string(obj, "", "task_description")?;
    let provenance = provenance(obj.get("provenance"))?;
    let mut steps = Vec::new();
    for (j, s) in array(obj, "", "steps")?.iter().enumerate() {
        let loc = format!("steps[{j}]");
        let so = as_object(s, &loc)?;
        let k = kind(field(so, &loc, "kind")?, &join(&loc, "kind"))?;
        let object_id = string(so, &loc, "object_id")?;
        known_object(&object_id, &join(&loc, "object_id"), known)?;
        let list = array(so, &loc, "affordances")?;
        if list.is_empty() {
            return Err(invalid(&join(&loc, "affordances"), "at least one affordance mode is required"));
        }
        let affordances = list
            .iter()
            .enumerate()
            .map(|(i, a)| affordance(a, &format!("{loc}.affordances[{i}]"), k, known))
            .collect::<Result<Vec<_>, _>>()?;
        steps.push(PrimitiveStep { kind: k, object_id, affordances });
    }
    if steps.is_empty() {
        return Err(invalid("steps", "plan has no steps"));
    }
    check_ordering(&steps)?;
    Ok(TaskPlan { task_description, provenance, steps })
}

/// Validates a complete plan given as (optionally fenced) JSON against the scene's object ids.
pub fn validate_plan(raw: &str, known_objects: &[&str]) -> Result<TaskPlan, PlanError> {
    let v = parse_json(raw)?;
    if let Some(found) = v.get("schema_version") {
        let found = found.as_u64().ok_or_else(|| invalid("schema_version", "expected an integer"))?;
        if found != PLAN_SCHEMA_VERSION {
            return Err(PlanError::Version { found, expected: PLAN_SCHEMA_VERSION });
        }
    }
    plan_from_value(&v, Some(known_objects))
}

/// Response of the task-level prompt: the primitive sequence.
pub fn parse_task_response(raw: &str, known_objects: &[&str]) -> Result<Vec<(PrimitiveKind, String)>, PlanError> {
    let v = parse_json(raw)?;
    let obj = as_object(&v, "")?;
    let list = array(obj, "", "primitives")?;
    if list.is_empty() {
        return Err(invalid("primitives", "no primitives returned"));
    }
    let mut out = Vec::new();
    let mut shadow = Vec::new();
    for (j, p) in list.iter().enumerate() {
        let loc = format!("primitives[{j}]");
        let po = as_object(p, &loc)?;
        let k = kind(field(po, &loc, "kind")?, &join(&loc, "kind"))?;
        let id = string(po, &loc, "object_id")?;
        known_object(&id, &join(&loc, "object_id"), Some(known_objects))?;
        shadow.push(PrimitiveStep { kind: k, object_id: id.clone(), affordances: Vec::new() });
        out.push((k, id));
    }
    check_ordering(&shadow).map_err(|e| match e {
        PlanError::Ordering { location, object } => {
            PlanError::Ordering { location: location.replace("steps", "primitives"), object }
        }
        e => e,
    })?;
    Ok(out)
}

/// Response of the modality prompt: one description per affordance mode.
pub fn parse_modes_response(raw: &str) -> Result<Vec<String>, PlanError> {
    let v = parse_json(raw)?;
    let obj = as_object(&v, "")?;
    let list = array(obj, "", "modes")?;
    if list.is_empty() {
        return Err(invalid("modes", "at least one mode is required"));
    }
    list.iter()
        .enumerate()
        .map(|(i, m)| {
            m.as_str()
                .filter(|s| !s.trim().is_empty())
                .map(str::to_string)
                .ok_or_else(|| invalid(&format!("modes[{i}]"), "expected a non-empty string"))
        })
        .collect()
}

/// Response of the affordance prompt for one mode of a `kind` primitive.
pub fn parse_affordance_response(raw: &str, kind: PrimitiveKind, known_objects: &[&str]) -> Result<AffordanceSpec, PlanError> {
    let v = parse_json(raw)?;
    affordance(&v, "", kind, Some(known_objects))
}

/// Serializes a plan in the cache format.
pub fn plan_to_json(plan: &TaskPlan) -> String {
    let mut v = serde_json::to_value(plan).expect("plan serializes");
    if let Value::Object(m) = &mut v {
        m.insert("schema_version".to_string(), Value::from(PLAN_SCHEMA_VERSION));
    }
    let mut s = serde_json::to_string_pretty(&v).expect("plan serializes");
    s.push('\n');
    s
}

/// Parses the cache format. Structural problems are reported as corruption.
pub fn plan_from_json(text: &str) -> Result<TaskPlan, PlanError> {
    let v: Value = serde_json::from_str(text).map_err(|e| PlanError::Corrupt(e.to_string()))?;
    let found = v
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| PlanError::Corrupt("missing schema_version".to_string()))?;
    if found != PLAN_SCHEMA_VERSION {
        return Err(PlanError::Version { found, expected: PLAN_SCHEMA_VERSION });
    }
    if v.get("provenance").is_none() {
        return Err(PlanError::Corrupt("missing provenance".to_string()));
    }
    plan_from_value(&v, None).map_err(|e| PlanError::Corrupt(e.to_string()))
}
