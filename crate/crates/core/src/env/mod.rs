//! Kinematic pick-and-place micro-world.
//!
//! The end-effector is a free-floating 6-DoF body driven by clipped Cartesian
//! deltas. Objects are boxes; a movable object attaches rigidly when the
//! gripper closes near one of its grasp frames and detaches when it opens.
//! Static obstacle boxes terminate the episode on contact with the gripper body
//! or a carried object. Rewards are sparse: `R_EX` once on success, `-P_COLL` on a
//! collision or tilt-violation step, zero otherwise.

mod collision;
mod observe;
mod scene;

pub use collision::{boxes_overlap, OrientedBox};
pub use observe::{observe, Observation, OBS_DIM, OBS_LAYOUT_VERSION, OBS_POSITION_SCALE};
pub use scene::{
    deg, top_down, GraspFrame, GraspTolerance, GripperBody, ObjectTemplate, ObstacleTemplate,
    RewardConstants, SceneError, SpawnRange, StepLimits, SuccessSpec, TaskId, TaskSpec,
    TiltConstraint, UnknownTask, Workspace, SCENE_SCHEMA_VERSION,
};

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::{Pose, Quat, Vec3};
use crate::rng::{streams, CounterRng};

/// Attempts made to draw a non-overlapping layout before keeping the last draw.
const SPAWN_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct RigidObject {
    pub id: String,
    pub pose: Pose,
    pub half_extents: Vec3,
    pub grasp_frames: Vec<GraspFrame>,
    pub attached: bool,
    pub initial_pose: Pose,
    /// Linear velocity over the last step, m/s.
    pub velocity: Vec3,
    pub movable: bool,
}

impl RigidObject {
    pub fn bounding_box(&self) -> OrientedBox {
        OrientedBox::new(self.pose, self.half_extents)
    }

    pub fn up_tilt(&self) -> f64 {
        let c = self.pose.orientation.z_axis().dot(Vec3::Z).clamp(-1.0, 1.0);
        libm::acos(c)
    }
}

/// Rigid attachment created at grasp time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grasp {
    pub object: usize,
    /// Object pose in the end-effector frame, constant while attached.
    pub ee_to_object: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub ee_pose: Pose,
    /// Open fraction, 1 = fully open.
    pub gripper: f64,
    /// Commanded Cartesian velocity of the last step (m/s, rad/s), the
    /// stand-in for joint velocities.
    pub joint_vel_proxy: [f64; 6],
    pub objects: Vec<RigidObject>,
    pub obstacles: Vec<OrientedBox>,
    pub step_index: u32,
    pub tilt_violation: bool,
    pub grasp: Option<Grasp>,
    pub succeeded: bool,
    pub done: bool,
}

impl EnvState {
    pub fn object(&self, id: &str) -> Option<&RigidObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn attached_object(&self) -> Option<usize> {
        self.grasp.map(|g| g.object)
    }

    pub fn joint_speed(&self) -> f64 {
        libm::sqrt(self.joint_vel_proxy.iter().map(|v| v * v).sum())
    }
}

/// Cartesian delta command. Rotations are rotation vectors in the end-effector frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Action {
    pub delta_pos: Vec3,
    pub delta_rot: Vec3,
    /// Negative closes the gripper, positive opens it.
    pub grip: f64,
}

impl Action {
    pub const DIM: usize = 7;

    pub fn to_array(&self) -> [f64; 7] {
        let (p, r) = (self.delta_pos, self.delta_rot);
        [p.x, p.y, p.z, r.x, r.y, r.z, self.grip]
    }

    pub fn from_slice(a: &[f64]) -> Action {
        Action {
            delta_pos: Vec3::new(a[0], a[1], a[2]),
            delta_rot: Vec3::new(a[3], a[4], a[5]),
            grip: a[6],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.delta_pos.is_finite() && self.delta_rot.is_finite() && self.grip.is_finite()
    }

    pub fn clipped(&self, limits: &StepLimits) -> Action {
        Action {
            delta_pos: self.delta_pos.clamp_abs(limits.max_lin_step),
            delta_rot: self.delta_rot.clamp_abs(limits.max_rot_step),
            grip: self.grip.clamp(-1.0, 1.0),
        }
    }
}

impl core::ops::Add for Action {
    type Output = Action;
    fn add(self, o: Action) -> Action {
        Action {
            delta_pos: self.delta_pos + o.delta_pos,
            delta_rot: self.delta_rot + o.delta_rot,
            grip: self.grip + o.grip,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub collision: bool,
    /// Tilt limit exceeded on this step.
    pub tilt_violation: bool,
    pub success: bool,
    /// Episode ended by the step limit rather than by the task.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

impl StepOutcome {
    /// Episode ended by success, collision or tilt (not by the step limit).
    pub fn terminal(&self) -> bool {
        self.done && !self.info.truncated
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid action: component {component} is not finite")]
    InvalidAction { component: usize },
    #[error("episode already finished; call reset")]
    EpisodeFinished,
}

fn yaw(angle: f64) -> Quat {
    Quat::from_axis_angle(Vec3::Z, angle)
}

/// Samples an initial state. Identical `(task, seed)` yields a bit-identical state.
pub fn reset(task: &TaskSpec, seed: u64) -> EnvState {
    let mut rng = CounterRng::new(seed, streams::RESET);
    let mut objects = Vec::new();
    let mut obstacles = Vec::new();
    for attempt in 0..SPAWN_ATTEMPTS {
        objects = task
            .objects
            .iter()
            .map(|t| {
                let s = &t.spawn;
                let p = Vec3::new(
                    rng.uniform_range(s.position_min.x, s.position_max.x),
                    rng.uniform_range(s.position_min.y, s.position_max.y),
                    rng.uniform_range(s.position_min.z, s.position_max.z),
                );
                let pose = Pose::new(p, yaw(rng.uniform_range(s.yaw_min, s.yaw_max)));
                RigidObject {
                    id: t.id.clone(),
                    pose,
                    half_extents: t.half_extents,
                    grasp_frames: t.grasp_frames.clone(),
                    attached: false,
                    initial_pose: pose,
                    velocity: Vec3::ZERO,
                    movable: t.movable,
                }
            })
            .collect();
        obstacles = world_obstacles(task, &objects);
        if layout_is_clear(&objects, &obstacles) || attempt + 1 == SPAWN_ATTEMPTS {
            break;
        }
    }
    EnvState {
        ee_pose: task.ee_start,
        gripper: 1.0,
        joint_vel_proxy: [0.0; 6],
        objects,
        obstacles,
        step_index: 0,
        tilt_violation: false,
        grasp: None,
        succeeded: false,
        done: false,
    }
}

fn world_obstacles(task: &TaskSpec, objects: &[RigidObject]) -> Vec<OrientedBox> {
    task.obstacles
        .iter()
        .map(|o| {
            let pose = match o.parent.as_deref().and_then(|p| objects.iter().find(|x| x.id == p)) {
                Some(parent) => parent.pose.compose(&o.pose),
                None => o.pose,
            };
            OrientedBox::new(pose, o.half_extents)
        })
        .collect()
}

fn layout_is_clear(objects: &[RigidObject], obstacles: &[OrientedBox]) -> bool {
    for (i, a) in objects.iter().enumerate().filter(|(_, o)| o.movable) {
        let ab = a.bounding_box();
        if obstacles.iter().any(|b| boxes_overlap(&ab, b)) {
            return false;
        }
        if objects.iter().enumerate().any(|(j, b)| j != i && b.movable && boxes_overlap(&ab, &b.bounding_box())) {
            return false;
        }
    }
    true
}

/// World-frame collision body of the gripper at `ee`.
pub fn gripper_box(task: &TaskSpec, ee: &Pose) -> OrientedBox {
    OrientedBox::new(ee.compose(&task.gripper.offset), task.gripper.half_extents)
}

/// True iff the gripper body or the carried object strictly overlaps an obstacle.
pub fn collision_query(task: &TaskSpec, state: &EnvState) -> bool {
    let gripper = gripper_box(task, &state.ee_pose);
    if state.obstacles.iter().any(|o| boxes_overlap(&gripper, o)) {
        return true;
    }
    if let Some(g) = state.grasp {
        let carried = state.objects[g.object].bounding_box();
        if state.obstacles.iter().any(|o| boxes_overlap(&carried, o)) {
            return true;
        }
    }
    false
}

/// Task success predicate on the current state.
pub fn check_success(state: &EnvState, task: &TaskSpec) -> bool {
    let find = |id: &str| state.object(id);
    match &task.success {
        SuccessSpec::Reach { object, target, tolerance } => match (find(object), find(target)) {
            (Some(o), Some(t)) => (o.pose.position - t.pose.position).norm() <= *tolerance,
            _ => false,
        },
        SuccessSpec::Insert { object, hole, tip_offset, object_axis, hole_axis, min_depth, align_tolerance } => {
            let (Some(peg), Some(hole)) = (find(object), find(hole)) else {
                return false;
            };
            let tip = peg.pose.transform_point(*tip_offset);
            let local = hole.pose.inverse().transform_point(tip);
            let h = hole.half_extents;
            let inside = local.x.abs() <= h.x && local.y.abs() <= h.y && local.z.abs() <= h.z;
            let depth = local.dot(hole_axis.vector()) + h.component(hole_axis.index());
            let a = peg.pose.orientation.rotate(object_axis.vector());
            let b = hole.pose.orientation.rotate(hole_axis.vector());
            let misalignment = libm::acos(a.dot(b).clamp(-1.0, 1.0));
            inside && depth >= *min_depth && misalignment <= *align_tolerance
        }
        SuccessSpec::Contain { object, container } => {
            let (Some(o), Some(c)) = (find(object), find(container)) else {
                return false;
            };
            if o.attached || state.tilt_violation {
                return false;
            }
            let vol = c.bounding_box();
            o.bounding_box().corners().iter().all(|p| vol.contains_point(*p))
        }
    }
}

/// Advances the world by one step.
pub fn step(task: &TaskSpec, state: &mut EnvState, action: &Action) -> Result<StepOutcome, EnvError> {
    if state.done {
        return Err(EnvError::EpisodeFinished);
    }
    if let Some(component) = action.to_array().iter().position(|v| !v.is_finite()) {
        return Err(EnvError::InvalidAction { component });
    }
    let a = action.clipped(&task.limits);

    let old_positions: Vec<Vec3> = state.objects.iter().map(|o| o.pose.position).collect();
    let prev_ee = state.ee_pose;
    let position = task.workspace.clamp(prev_ee.position + a.delta_pos);
    let orientation = prev_ee.orientation * Quat::from_rotvec(a.delta_rot);
    state.ee_pose = Pose::new(position, orientation);

    let applied = state.ee_pose.position - prev_ee.position;
    let r = a.delta_rot;
    let inv_dt = 1.0 / task.dt;
    state.joint_vel_proxy = [
        applied.x * inv_dt,
        applied.y * inv_dt,
        applied.z * inv_dt,
        r.x * inv_dt,
        r.y * inv_dt,
        r.z * inv_dt,
    ];

    if let Some(g) = state.grasp {
        state.objects[g.object].pose = state.ee_pose.compose(&g.ee_to_object);
    }
    if a.grip > 0.0 {
        state.gripper = 1.0;
        if let Some(g) = state.grasp.take() {
            state.objects[g.object].attached = false;
        }
    } else if a.grip < 0.0 {
        state.gripper = 0.0;
        if state.grasp.is_none() {
            try_attach(task, state);
        }
    }

    for (o, old) in state.objects.iter_mut().zip(&old_positions) {
        o.velocity = (o.pose.position - *old) * inv_dt;
    }
    state.step_index += 1;

    let mut info = StepInfo { collision: collision_query(task, state), ..StepInfo::default() };
    if let Some(t) = &task.tilt {
        if let Some(o) = state.object(&t.object) {
            if o.up_tilt() > t.max_angle {
                info.tilt_violation = !state.tilt_violation;
                state.tilt_violation = true;
            }
        }
    }

    let mut reward = 0.0;
    let mut done = false;
    if info.collision || info.tilt_violation {
        reward = -task.rewards.collision_penalty;
        done = true;
    } else if !state.succeeded && check_success(state, task) {
        state.succeeded = true;
        info.success = true;
        reward = task.rewards.success_reward;
        done = true;
    }
    if !done && state.step_index >= task.max_episode_steps {
        info.truncated = true;
        done = true;
    }
    state.done = done;
    Ok(StepOutcome { reward, done, info })
}

fn try_attach(task: &TaskSpec, state: &mut EnvState) {
    let tol = task.grasp_tolerance;
    let ee = state.ee_pose;
    let hit = state.objects.iter().enumerate().filter(|(_, o)| o.movable).find(|(_, o)| {
        o.grasp_frames.iter().any(|f| {
            let (dp, da) = o.pose.compose(&f.pose).distance(&ee);
            dp <= tol.position && da <= tol.orientation
        })
    });
    if let Some((i, o)) = hit {
        let ee_to_object = ee.relative(&o.pose);
        state.grasp = Some(Grasp { object: i, ee_to_object });
        state.objects[i].attached = true;
    }
}

/// Owning wrapper pairing a task layout with its live state.
#[derive(Clone, Debug)]
pub struct Env {
    spec: TaskSpec,
    state: EnvState,
}

impl Env {
    pub fn new(spec: TaskSpec) -> Result<Env, SceneError> {
        spec.validate()?;
        let state = reset(&spec, 0);
        Ok(Env { spec, state })
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn reset(&mut self, seed: u64) -> &EnvState {
        self.state = reset(&self.spec, seed);
        &self.state
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        step(&self.spec, &mut self.state, action)
    }

    pub fn collision(&self) -> bool {
        collision_query(&self.spec, &self.state)
    }

    pub fn success(&self) -> bool {
        check_success(&self.state, &self.spec)
    }
}

#[cfg(test)]
mod tests;
