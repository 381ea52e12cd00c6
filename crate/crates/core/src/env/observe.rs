//! Flat goal-conditioned observation vector.
//!
//! Layout (version 1, 26 entries):
//!
//! | range   | content                                         |
//! |---------|-------------------------------------------------|
//! | 0..3    | ee position × `OBS_POSITION_SCALE`              |
//! | 3..7    | ee quaternion (w, x, y, z), canonical sign      |
//! | 7       | gripper open fraction                           |
//! | 8..11   | focus object position × `OBS_POSITION_SCALE`    |
//! | 11..15  | focus object quaternion, canonical sign         |
//! | 15..18  | goal position × `OBS_POSITION_SCALE`            |
//! | 18..22  | goal quaternion, canonical sign                 |
//! | 22..25  | (goal − ee) position × `OBS_POSITION_SCALE`     |
//! | 25      | 1 if an object is attached, else 0              |
//!
//! Without a focus object the object block is zero with an identity quaternion.

use crate::geometry::{Pose, Quat, Vec3};

use super::EnvState;

pub const OBS_DIM: usize = 26;
pub const OBS_LAYOUT_VERSION: u32 = 1;
/// Positions are given in decimeters so that they are of order one.
pub const OBS_POSITION_SCALE: f64 = 10.0;

pub type Observation = [f64; OBS_DIM];

fn put_vec(out: &mut [f64], at: usize, v: Vec3) {
    out[at..at + 3].copy_from_slice(&(v * OBS_POSITION_SCALE).to_array());
}

fn put_quat(out: &mut [f64], at: usize, q: Quat) {
    out[at..at + 4].copy_from_slice(&q.canonical().to_array());
}

pub fn observe(state: &EnvState, focus: Option<usize>, goal: &Pose) -> Observation {
    let mut o = [0.0; OBS_DIM];
    let ee = state.ee_pose;
    put_vec(&mut o, 0, ee.position);
    put_quat(&mut o, 3, ee.orientation);
    o[7] = state.gripper;
    let obj = focus.and_then(|i| state.objects.get(i)).map(|x| x.pose).unwrap_or(Pose::IDENTITY);
    put_vec(&mut o, 8, obj.position);
    put_quat(&mut o, 11, obj.orientation);
    put_vec(&mut o, 15, goal.position);
    put_quat(&mut o, 18, goal.orientation);
    put_vec(&mut o, 22, goal.position - ee.position);
    o[25] = if state.grasp.is_some() { 1.0 } else { 0.0 };
    o
}
