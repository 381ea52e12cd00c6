//! Symbolic affordance to SE(3) goal.

use alloc::string::ToString;

use super::{AffordanceSpec, PlanError, PositionAnchor};
use crate::env::RigidObject;
use crate::geometry::{Pose, Quat, SignedAxis, Vec3};

fn face_center(axis: SignedAxis, half: Vec3) -> Vec3 {
    axis.vector() * half.component(axis.index())
}

/// Anchor point in the object frame of a box with the given half extents.
pub fn anchor_point(anchor: &PositionAnchor, half_extents: Vec3) -> Vec3 {
    match anchor {
        PositionAnchor::Center { offset } => *offset,
        PositionAnchor::Face { axis, offset } => face_center(*axis, half_extents) + *offset,
        PositionAnchor::Edge { axis, second, offset } => {
            face_center(*axis, half_extents) + face_center(*second, half_extents) + *offset
        }
    }
}

fn find<'a>(objects: &'a [RigidObject], id: &str) -> Result<&'a RigidObject, PlanError> {
    objects.iter().find(|o| o.id == id).ok_or_else(|| PlanError::UnresolvedReference(id.to_string()))
}

/// Goal pose for one affordance mode of a primitive acting on `object_id`.
///
/// Pick goals are end-effector poses. Transport goals are placement poses of
/// the carried object; converting them into end-effector targets is the base
/// policy's job.
pub fn parse_to_goal(objects: &[RigidObject], object_id: &str, spec: &AffordanceSpec) -> Result<Pose, PlanError> {
    match spec {
        AffordanceSpec::Pick(p) => {
            let obj = find(objects, object_id)?;
            let local = anchor_point(&p.position, obj.half_extents);
            let r = obj.pose.orientation;
            let y = r.rotate(p.ee_y_axis.vector());
            let z = r.rotate(p.ee_z_axis.vector());
            let x = y.cross(z);
            Ok(Pose::new(obj.pose.transform_point(local), Quat::from_columns(x, y, z)))
        }
        AffordanceSpec::Transport(t) => {
            find(objects, object_id)?;
            let reference = find(objects, &t.reference_object)?;
            Ok(reference.pose.compose(&t.relative_pose))
        }
    }
}
