//! Declarative task layouts.
//!
//! A [`TaskSpec`] is plain data and (de)serializes to the versioned scene JSON
//! schema. The three built-in layouts are defined in code in [`TaskSpec::builtin`];
//! the std companion crate ships the same layouts as JSON files.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Quat, SignedAxis, Vec3};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskId {
    PickCubeMini,
    PegInsertMini,
    PutBoxMini,
}

impl TaskId {
    pub const ALL: [TaskId; 3] = [TaskId::PickCubeMini, TaskId::PegInsertMini, TaskId::PutBoxMini];

    /// Short lowercase name used on the command line and in fixture filenames.
    pub fn short_name(self) -> &'static str {
        match self {
            TaskId::PickCubeMini => "pickcube",
            TaskId::PegInsertMini => "peginsert",
            TaskId::PutBoxMini => "putbox",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::PickCubeMini => "PickCubeMini",
            TaskId::PegInsertMini => "PegInsertMini",
            TaskId::PutBoxMini => "PutBoxMini",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown task `{0}` (expected pickcube, peginsert or putbox)")]
pub struct UnknownTask(pub String);

impl FromStr for TaskId {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        TaskId::ALL
            .into_iter()
            .find(|t| t.short_name() == lower || t.as_str().to_ascii_lowercase() == lower)
            .ok_or_else(|| UnknownTask(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspFrame {
    pub name: String,
    /// Gripper frame in the object frame at which a close command attaches.
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpawnRange {
    pub position_min: Vec3,
    pub position_max: Vec3,
    #[serde(default)]
    pub yaw_min: f64,
    #[serde(default)]
    pub yaw_max: f64,
}

impl SpawnRange {
    pub fn fixed(p: Vec3) -> Self {
        SpawnRange { position_min: p, position_max: p, yaw_min: 0.0, yaw_max: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectTemplate {
    pub id: String,
    pub half_extents: Vec3,
    pub spawn: SpawnRange,
    #[serde(default)]
    pub grasp_frames: Vec<GraspFrame>,
    /// Static objects (targets, hole volumes, cupboard interiors) never attach.
    pub movable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleTemplate {
    pub name: String,
    /// Object whose frame `pose` is expressed in; world frame when absent.
    #[serde(default)]
    pub parent: Option<String>,
    pub pose: Pose,
    pub half_extents: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: Vec3,
    pub max: Vec3,
}

impl Workspace {
    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p.component(i) >= self.min.component(i) && p.component(i) <= self.max.component(i))
    }

    pub fn clamp(&self, p: Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }
}

/// Collision body of the gripper, rigidly fixed in the end-effector frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperBody {
    pub offset: Pose,
    pub half_extents: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLimits {
    /// Per-component translation limit, meters per step.
    pub max_lin_step: f64,
    /// Per-component rotation-vector limit, radians per step.
    pub max_rot_step: f64,
}

impl Default for StepLimits {
    fn default() -> Self {
        StepLimits { max_lin_step: 0.01, max_rot_step: 0.05 }
    }
}

impl StepLimits {
    /// Limits as a 7-vector in action layout (3 translation, 3 rotation, grip).
    pub fn as_action_scale(&self) -> [f64; 7] {
        let (l, r) = (self.max_lin_step, self.max_rot_step);
        [l, l, l, r, r, r, 1.0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConstants {
    pub success_reward: f64,
    pub collision_penalty: f64,
}

impl Default for RewardConstants {
    fn default() -> Self {
        RewardConstants { success_reward: 10.0, collision_penalty: 5.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspTolerance {
    pub position: f64,
    pub orientation: f64,
}

impl Default for GraspTolerance {
    fn default() -> Self {
        GraspTolerance { position: 0.015, orientation: 20.0_f64.to_radians() }
    }
}

pub fn deg(d: f64) -> f64 {
    d.to_radians()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuccessSpec {
    /// Object center within `tolerance` of the target object's position.
    Reach { object: String, target: String, tolerance: f64 },
    /// A tip point of `object` inside the `hole` volume, at least `min_depth`
    /// past its entrance face, with the two axes aligned within `align_tolerance`.
    Insert {
        object: String,
        hole: String,
        tip_offset: Vec3,
        object_axis: SignedAxis,
        hole_axis: SignedAxis,
        min_depth: f64,
        align_tolerance: f64,
    },
    /// Object fully inside the `container` volume, released, without any tilt violation.
    Contain { object: String, container: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltConstraint {
    pub object: String,
    pub max_angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub schema_version: u32,
    pub task_id: TaskId,
    /// Language command handed to the planner.
    pub description: String,
    /// Seconds per step; converts per-step motion into velocities.
    pub dt: f64,
    pub max_episode_steps: u32,
    pub ee_start: Pose,
    pub gripper: GripperBody,
    #[serde(default)]
    pub limits: StepLimits,
    #[serde(default)]
    pub rewards: RewardConstants,
    #[serde(default)]
    pub grasp_tolerance: GraspTolerance,
    pub workspace: Workspace,
    pub objects: Vec<ObjectTemplate>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleTemplate>,
    pub success: SuccessSpec,
    #[serde(default)]
    pub tilt: Option<TiltConstraint>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("scene schema version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("object `{0}` has non-positive half extents")]
    BadExtents(String),
    #[error("duplicate object id `{0}`")]
    DuplicateId(String),
    #[error("{context} references unknown object `{id}`")]
    UnknownObject { context: String, id: String },
    #[error("spawn range of `{0}` leaves the workspace")]
    SpawnOutsideWorkspace(String),
    #[error("spawn range of `{0}` is inverted")]
    InvertedSpawn(String),
    #[error("invalid scene parameter: {0}")]
    Parameter(String),
}

impl TaskSpec {
    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.schema_version != SCENE_SCHEMA_VERSION {
            return Err(SceneError::Version { found: self.schema_version, expected: SCENE_SCHEMA_VERSION });
        }
        if !(self.dt > 0.0) || self.max_episode_steps == 0 {
            return Err(SceneError::Parameter("dt and max_episode_steps must be positive".into()));
        }
        if !(self.limits.max_lin_step > 0.0 && self.limits.max_rot_step > 0.0) {
            return Err(SceneError::Parameter("step limits must be positive".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if self.objects[..i].iter().any(|p| p.id == o.id) {
                return Err(SceneError::DuplicateId(o.id.clone()));
            }
            if !(o.half_extents.x > 0.0 && o.half_extents.y > 0.0 && o.half_extents.z > 0.0) {
                return Err(SceneError::BadExtents(o.id.clone()));
            }
            let s = &o.spawn;
            if (0..3).any(|k| s.position_min.component(k) > s.position_max.component(k)) || s.yaw_min > s.yaw_max {
                return Err(SceneError::InvertedSpawn(o.id.clone()));
            }
            if !self.workspace.contains(s.position_min) || !self.workspace.contains(s.position_max) {
                return Err(SceneError::SpawnOutsideWorkspace(o.id.clone()));
            }
        }
        let known = |ctx: &str, id: &str| -> Result<(), SceneError> {
            if self.object_index(id).is_some() {
                Ok(())
            } else {
                Err(SceneError::UnknownObject { context: ctx.to_string(), id: id.to_string() })
            }
        };
        for ob in &self.obstacles {
            if !(ob.half_extents.x > 0.0 && ob.half_extents.y > 0.0 && ob.half_extents.z > 0.0) {
                return Err(SceneError::BadExtents(ob.name.clone()));
            }
            if let Some(p) = &ob.parent {
                known("obstacle parent", p)?;
            }
        }
        match &self.success {
            SuccessSpec::Reach { object, target, .. } => {
                known("success", object)?;
                known("success", target)?;
            }
            SuccessSpec::Insert { object, hole, .. } => {
                known("success", object)?;
                known("success", hole)?;
            }
            SuccessSpec::Contain { object, container } => {
                known("success", object)?;
                known("success", container)?;
            }
        }
        if let Some(t) = &self.tilt {
            known("tilt constraint", &t.object)?;
        }
        Ok(())
    }

    pub fn builtin(task: TaskId) -> TaskSpec {
        match task {
            TaskId::PickCubeMini => pick_cube(),
            TaskId::PegInsertMini => peg_insert(),
            TaskId::PutBoxMini => put_box(),
        }
    }
}

/// Gripper pointing straight down, fingers opening along world y.
pub fn top_down() -> Quat {
    Quat::new(0.0, 1.0, 0.0, 0.0)
}

fn common(task: TaskId, description: &str) -> TaskSpec {
    TaskSpec {
        schema_version: SCENE_SCHEMA_VERSION,
        task_id: task,
        description: description.to_string(),
        dt: 0.1,
        max_episode_steps: 200,
        ee_start: Pose::new(Vec3::new(0.0, 0.0, 0.25), top_down()),
        gripper: GripperBody {
            offset: Pose::from_position(Vec3::new(0.0, 0.0, -0.03)),
            half_extents: Vec3::new(0.01, 0.04, 0.03),
        },
        limits: StepLimits::default(),
        rewards: RewardConstants::default(),
        grasp_tolerance: GraspTolerance::default(),
        workspace: Workspace { min: Vec3::new(-0.3, -0.4, 0.0), max: Vec3::new(0.6, 0.4, 0.5) },
        objects: Vec::new(),
        obstacles: Vec::new(),
        success: SuccessSpec::Reach { object: String::new(), target: String::new(), tolerance: 0.0 },
        tilt: None,
    }
}

fn frame(name: &str, position: Vec3, orientation: Quat) -> GraspFrame {
    GraspFrame { name: name.to_string(), pose: Pose::new(position, orientation) }
}

fn obstacle(name: &str, parent: &str, center: Vec3, half: Vec3) -> ObstacleTemplate {
    ObstacleTemplate {
        name: name.to_string(),
        parent: Some(parent.to_string()),
        pose: Pose::from_position(center),
        half_extents: half,
    }
}

fn pick_cube() -> TaskSpec {
    let mut spec = common(TaskId::PickCubeMini, "pick up the cube and move it to the goal");
    let down = top_down();
    let yaw = |k: f64| Quat::from_axis_angle(Vec3::Z, k * FRAC_PI_2) * down;
    let top = Vec3::new(0.0, 0.0, 0.02);
    spec.objects = vec![
        ObjectTemplate {
            id: "cube".into(),
            half_extents: Vec3::new(0.02, 0.02, 0.02),
            spawn: SpawnRange {
                position_min: Vec3::new(-0.05, -0.15, 0.02),
                position_max: Vec3::new(0.15, 0.15, 0.02),
                yaw_min: -FRAC_PI_4,
                yaw_max: FRAC_PI_4,
            },
            grasp_frames: vec![
                frame("top", top, yaw(0.0)),
                frame("top_90", top, yaw(1.0)),
                frame("top_180", top, yaw(2.0)),
                frame("top_270", top, yaw(3.0)),
            ],
            movable: true,
        },
        ObjectTemplate {
            id: "goal".into(),
            half_extents: Vec3::new(0.005, 0.005, 0.005),
            spawn: SpawnRange {
                position_min: Vec3::new(-0.05, -0.15, 0.08),
                position_max: Vec3::new(0.15, 0.15, 0.2),
                yaw_min: 0.0,
                yaw_max: 0.0,
            },
            grasp_frames: Vec::new(),
            movable: false,
        },
    ];
    spec.success = SuccessSpec::Reach { object: "cube".into(), target: "goal".into(), tolerance: 0.025 };
    spec
}

fn peg_insert() -> TaskSpec {
    let mut spec = common(TaskId::PegInsertMini, "pick up the peg and insert it into the hole");
    let down = top_down();
    spec.objects = vec![
        ObjectTemplate {
            id: "peg".into(),
            half_extents: Vec3::new(0.06, 0.01, 0.01),
            spawn: SpawnRange {
                position_min: Vec3::new(-0.05, -0.05, 0.01),
                position_max: Vec3::new(0.05, 0.05, 0.01),
                yaw_min: -0.2,
                yaw_max: 0.2,
            },
            grasp_frames: vec![
                frame("head", Vec3::new(-0.04, 0.0, 0.01), down),
                frame("end", Vec3::new(0.04, 0.0, 0.01), down),
            ],
            movable: true,
        },
        ObjectTemplate {
            id: "hole".into(),
            half_extents: Vec3::new(0.03, 0.02, 0.02),
            spawn: SpawnRange {
                position_min: Vec3::new(0.30, -0.05, 0.06),
                position_max: Vec3::new(0.30, 0.05, 0.06),
                yaw_min: 0.0,
                yaw_max: 0.0,
            },
            grasp_frames: Vec::new(),
            movable: false,
        },
    ];
    // block around a 4 cm square channel along the hole's +x axis
    spec.obstacles = vec![
        obstacle("block_top", "hole", Vec3::new(0.0, 0.0, 0.05), Vec3::new(0.03, 0.08, 0.03)),
        obstacle("block_bottom", "hole", Vec3::new(0.0, 0.0, -0.04), Vec3::new(0.03, 0.08, 0.02)),
        obstacle("block_left", "hole", Vec3::new(0.0, -0.05, 0.0), Vec3::new(0.03, 0.03, 0.02)),
        obstacle("block_right", "hole", Vec3::new(0.0, 0.05, 0.0), Vec3::new(0.03, 0.03, 0.02)),
    ];
    spec.success = SuccessSpec::Insert {
        object: "peg".into(),
        hole: "hole".into(),
        tip_offset: Vec3::new(0.06, 0.0, 0.0),
        object_axis: SignedAxis::PosX,
        hole_axis: SignedAxis::PosX,
        min_depth: 0.02,
        align_tolerance: deg(15.0),
    };
    spec
}

fn put_box() -> TaskSpec {
    let mut spec = common(TaskId::PutBoxMini, "put the box in the cupboard");
    let side = Quat::from_axis_angle(Vec3::Y, FRAC_PI_2) * Quat::from_axis_angle(Vec3::Z, PI);
    spec.objects = vec![
        ObjectTemplate {
            id: "box".into(),
            half_extents: Vec3::new(0.02, 0.02, 0.04),
            spawn: SpawnRange {
                position_min: Vec3::new(-0.02, -0.05, 0.04),
                position_max: Vec3::new(0.06, 0.05, 0.04),
                yaw_min: -0.2,
                yaw_max: 0.2,
            },
            grasp_frames: vec![
                frame("side", Vec3::new(-0.02, 0.0, 0.0), side),
                frame("top", Vec3::new(0.0, 0.0, 0.04), top_down()),
            ],
            movable: true,
        },
        ObjectTemplate {
            id: "cupboard".into(),
            half_extents: Vec3::new(0.07, 0.08, 0.055),
            spawn: SpawnRange {
                position_min: Vec3::new(0.2, -0.03, 0.055),
                position_max: Vec3::new(0.2, 0.03, 0.055),
                yaw_min: 0.0,
                yaw_max: 0.0,
            },
            grasp_frames: Vec::new(),
            movable: false,
        },
    ];
    let c = "cupboard";
    spec.obstacles = vec![
        obstacle("ceiling", c, Vec3::new(0.01, 0.0, 0.065), Vec3::new(0.08, 0.10, 0.01)),
        obstacle("back_wall", c, Vec3::new(0.08, 0.0, 0.0), Vec3::new(0.01, 0.10, 0.055)),
        obstacle("left_wall", c, Vec3::new(0.0, -0.09, 0.0), Vec3::new(0.07, 0.01, 0.055)),
        obstacle("right_wall", c, Vec3::new(0.0, 0.09, 0.0), Vec3::new(0.07, 0.01, 0.055)),
        obstacle("lip", c, Vec3::new(-0.07, 0.0, -0.04975), Vec3::new(0.01, 0.08, 0.00525)),
    ];
    spec.success = SuccessSpec::Contain { object: "box".into(), container: c.into() };
    spec.tilt = Some(TiltConstraint { object: "box".into(), max_angle: deg(30.0) });
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for t in TaskId::ALL {
            TaskSpec::builtin(t).validate().unwrap();
        }
    }

    #[test]
    fn task_names_parse() {
        assert_eq!("putbox".parse::<TaskId>().unwrap(), TaskId::PutBoxMini);
        assert_eq!("PegInsertMini".parse::<TaskId>().unwrap(), TaskId::PegInsertMini);
        assert!("stack".parse::<TaskId>().is_err());
    }

    #[test]
    fn side_frame_axes() {
        let spec = TaskSpec::builtin(TaskId::PutBoxMini);
        let side = &spec.objects[0].grasp_frames[0].pose.orientation;
        assert!((side.z_axis() - Vec3::X).norm() < 1e-12);
        assert!((side.y_axis() + Vec3::Y).norm() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let mut s = TaskSpec::builtin(TaskId::PickCubeMini);
        s.objects[0].half_extents.x = 0.0;
        assert_eq!(s.validate(), Err(SceneError::BadExtents("cube".into())));

        let mut s = TaskSpec::builtin(TaskId::PickCubeMini);
        s.objects[0].spawn.position_max.x = 2.0;
        assert_eq!(s.validate(), Err(SceneError::SpawnOutsideWorkspace("cube".into())));

        let mut s = TaskSpec::builtin(TaskId::PegInsertMini);
        s.obstacles[0].parent = Some("banana".into());
        assert!(matches!(s.validate(), Err(SceneError::UnknownObject { .. })));

        let mut s = TaskSpec::builtin(TaskId::PutBoxMini);
        s.schema_version = 9;
        assert!(matches!(s.validate(), Err(SceneError::Version { found: 9, .. })));
    }
}
