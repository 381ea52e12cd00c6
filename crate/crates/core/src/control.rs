//! PD base primitives, their termination rules and the dense intrinsic reward.

use serde::{Deserialize, Serialize};

use crate::env::{Action, EnvState, RigidObject, StepLimits};
use crate::geometry::{Pose, Vec3};
use crate::planner::PrimitiveKind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrimitiveController {
    pub gain_pos: f64,
    pub gain_rot: f64,
    pub max_lin_step: f64,
    pub max_rot_step: f64,
    /// Pick closes the gripper once the position error is below this, meters.
    pub close_distance: f64,
    /// Height the end-effector rises above the pick goal once the object is attached, meters.
    pub lift_height: f64,
}

impl Default for PrimitiveController {
    fn default() -> Self {
        let l = StepLimits::default();
        PrimitiveController {
            gain_pos: 1.0,
            gain_rot: 1.0,
            max_lin_step: l.max_lin_step,
            max_rot_step: l.max_rot_step,
            close_distance: 0.01,
            lift_height: 0.05,
        }
    }
}

impl PrimitiveController {
    pub fn validate(&self) -> Result<(), &'static str> {
        let all = [self.gain_pos, self.gain_rot, self.max_lin_step, self.max_rot_step, self.close_distance];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(self.lift_height >= 0.0) {
            return Err("controller gains, step limits and close distance must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminationRule {
    /// Meters the picked object must have moved from its initial position.
    pub pick_displacement_threshold: f64,
    /// Meters between the carried object and its placement goal.
    pub transport_pos_threshold: f64,
    /// Object speed below which it counts as static, m/s.
    pub static_vel_threshold: f64,
}

impl Default for TerminationRule {
    fn default() -> Self {
        // 1 mm per 0.1 s step
        TerminationRule { pick_displacement_threshold: 0.02, transport_pos_threshold: 0.025, static_vel_threshold: 0.01 }
    }
}

impl TerminationRule {
    pub fn validate(&self) -> Result<(), &'static str> {
        let all = [self.pick_displacement_threshold, self.transport_pos_threshold, self.static_vel_threshold];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("termination thresholds must be positive");
        }
        Ok(())
    }
}

/// Proportional step toward `goal`, clipped per component.
///
/// The rotation is expressed in the end-effector frame, matching how the
/// environment applies `delta_rot`.
pub fn base_action(state: &EnvState, goal: &Pose, grip: f64, ctl: &PrimitiveController) -> Action {
    let ee = state.ee_pose;
    let dp = (goal.position - ee.position) * ctl.gain_pos;
    let dr = (ee.orientation.inverse() * goal.orientation).to_rotvec() * ctl.gain_rot;
    Action { delta_pos: dp.clamp_abs(ctl.max_lin_step), delta_rot: dr.clamp_abs(ctl.max_rot_step), grip }
}

pub fn pick_done(obj: &RigidObject, rule: &TerminationRule) -> bool {
    (obj.pose.position - obj.initial_pose.position).norm() > rule.pick_displacement_threshold
}

/// Object within the position threshold of its placement goal and nearly static.
pub fn transport_done(obj: &RigidObject, goal: &Pose, rule: &TerminationRule) -> bool {
    (obj.pose.position - goal.position).norm() < rule.transport_pos_threshold
        && obj.velocity.norm() < rule.static_vel_threshold
}

/// Dense shaping reward `-tanh(5 e) - 0.25 tanh(|q̇| / π)`, with `e` the
/// end-effector distance to `goal_position`.
pub fn intrinsic_reward(state: &EnvState, goal_position: Vec3) -> f64 {
    let e = (goal_position - state.ee_pose.position).norm();
    -libm::tanh(5.0 * e) - 0.25 * libm::tanh(state.joint_speed() / core::f64::consts::PI)
}

/// A running primitive: its kind, target object and selected goal.
///
/// Pick goals are end-effector poses; transport goals are placement poses of
/// the carried object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub object: usize,
    pub goal: Pose,
    /// Grasp captured when a transport starts, used if the object is no longer attached.
    carry: Option<Pose>,
}

impl Primitive {
    pub fn new(kind: PrimitiveKind, object: usize, goal: Pose, state: &EnvState) -> Self {
        let carry = state.grasp.filter(|g| g.object == object).map(|g| g.ee_to_object);
        Primitive { kind, object, goal, carry }
    }

    /// Current end-effector target of the base controller.
    pub fn ee_target(&self, state: &EnvState, ctl: &PrimitiveController) -> Pose {
        match self.kind {
            PrimitiveKind::Pick => {
                if state.grasp.is_some_and(|g| g.object == self.object) {
                    Pose::new(self.goal.position + Vec3::Z * ctl.lift_height, self.goal.orientation)
                } else {
                    self.goal
                }
            }
            PrimitiveKind::Transport => {
                let rel = state.grasp.filter(|g| g.object == self.object).map(|g| g.ee_to_object).or(self.carry);
                match rel {
                    Some(r) => self.goal.compose(&r.inverse()),
                    None => self.goal,
                }
            }
        }
    }

    pub fn grip(&self, state: &EnvState, ctl: &PrimitiveController, rule: &TerminationRule) -> f64 {
        match self.kind {
            PrimitiveKind::Pick => {
                let attached = state.grasp.is_some_and(|g| g.object == self.object);
                let near = (self.goal.position - state.ee_pose.position).norm() < ctl.close_distance;
                if attached || near {
                    -1.0
                } else {
                    1.0
                }
            }
            PrimitiveKind::Transport => {
                if transport_done(&state.objects[self.object], &self.goal, rule) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn base_action(&self, state: &EnvState, ctl: &PrimitiveController, rule: &TerminationRule) -> Action {
        base_action(state, &self.ee_target(state, ctl), self.grip(state, ctl, rule), ctl)
    }

    pub fn done(&self, state: &EnvState, rule: &TerminationRule) -> bool {
        let obj = &state.objects[self.object];
        match self.kind {
            PrimitiveKind::Pick => pick_done(obj, rule),
            PrimitiveKind::Transport => !obj.attached && transport_done(obj, &self.goal, rule),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{reset, step, TaskId, TaskSpec};
    use crate::geometry::Quat;
    use crate::planner::{fixture_plan, parse_to_goal};
    use proptest::prelude::*;

    fn free_state(ee: Pose) -> EnvState {
        let spec = TaskSpec::builtin(TaskId::PickCubeMini);
        let mut st = reset(&spec, 0);
        st.ee_pose = ee;
        st
    }

    /// The shaped reward evaluated with an independent tanh.
    fn reference_reward(e: f64, qdot: f64) -> f64 {
        fn tanh(x: f64) -> f64 {
            let e2 = libm::exp(-2.0 * x.abs());
            let t = (1.0 - e2) / (1.0 + e2);
            if x < 0.0 { -t } else { t }
        }
        -tanh(5.0 * e) - 0.25 * tanh(qdot / core::f64::consts::PI)
    }

    #[test]
    fn zero_error_zero_action() {
        let ee = Pose::new(Vec3::new(0.1, 0.0, 0.2), Quat::from_axis_angle(Vec3::Y, 0.4));
        let a = base_action(&free_state(ee), &ee, 1.0, &PrimitiveController::default());
        assert_eq!(a.delta_pos, Vec3::ZERO);
        assert_eq!(a.delta_rot, Vec3::ZERO);
    }

    #[test]
    fn far_goal_is_clipped() {
        let ee = Pose::new(Vec3::ZERO, Quat::IDENTITY);
        let goal = Pose::new(Vec3::new(1.0, 0.0, 0.0), Quat::IDENTITY);
        let a = base_action(&free_state(ee), &goal, 1.0, &PrimitiveController::default());
        assert_eq!(a.delta_pos, Vec3::new(0.01, 0.0, 0.0));
    }

    #[test]
    fn displacement_thresholds() {
        let spec = TaskSpec::builtin(TaskId::PickCubeMini);
        let st = reset(&spec, 0);
        let rule = TerminationRule::default();
        let mut o = st.objects[0].clone();
        assert!(!pick_done(&o, &rule));
        o.pose.position.z += 0.05;
        assert!(pick_done(&o, &rule));
        o.initial_pose.position = Vec3::ZERO;
        o.pose.position = Vec3::new(0.02, 0.0, 0.0);
        assert!(!pick_done(&o, &rule));
    }

    #[test]
    fn transport_thresholds() {
        let spec = TaskSpec::builtin(TaskId::PickCubeMini);
        let st = reset(&spec, 0);
        let rule = TerminationRule::default();
        let mut o = st.objects[0].clone();
        let goal = o.pose;
        assert!(transport_done(&o, &goal, &rule));
        o.velocity = Vec3::new(0.1, 0.0, 0.0);
        assert!(!transport_done(&o, &goal, &rule));
        o.velocity = Vec3::ZERO;
        o.pose.position.x += 0.1;
        assert!(!transport_done(&o, &goal, &rule));
    }

    #[test]
    fn intrinsic_reward_values() {
        let mut st = free_state(Pose::IDENTITY);
        assert_eq!(intrinsic_reward(&st, Vec3::ZERO), 0.0);
        let far = intrinsic_reward(&st, Vec3::new(1e3, 0.0, 0.0));
        assert!((far + 1.0).abs() < 1e-12);
        st.joint_vel_proxy = [core::f64::consts::PI, 0.0, 0.0, 0.0, 0.0, 0.0];
        let r = intrinsic_reward(&st, Vec3::new(0.2, 0.0, 0.0));
        // -tanh(1) - 0.25 tanh(1), tanh(1) = 0.76159415595576488812
        assert!((r - (-1.25 * 0.761_594_155_955_764_9)).abs() < 1e-15);
        assert!((r + 0.951_992_694_944_706_1).abs() < 1e-15);
    }

    #[test]
    fn intrinsic_reward_grid_matches_reference() {
        let mut st = free_state(Pose::IDENTITY);
        for i in 0..50 {
            for k in 0..20 {
                let e = i as f64 * 0.02;
                let v = k as f64 * 0.3;
                st.joint_vel_proxy = [0.0, v, 0.0, 0.0, 0.0, 0.0];
                let r = intrinsic_reward(&st, Vec3::new(0.0, 0.0, e));
                assert!((r - reference_reward(e, v)).abs() < 1e-12);
                assert!(r <= 0.0 && r > -1.25);
            }
        }
    }

    #[test]
    fn pd_strictly_decreases_then_arrives() {
        let ee = Pose::new(Vec3::new(0.0, 0.0, 0.25), Quat::IDENTITY);
        let goal = Pose::new(Vec3::new(0.123, -0.05, 0.1), Quat::IDENTITY);
        let spec = TaskSpec::builtin(TaskId::PickCubeMini);
        let mut st = free_state(ee);
        let ctl = PrimitiveController::default();
        let mut prev = (goal.position - st.ee_pose.position).norm();
        let bound = (prev / ctl.max_lin_step).ceil() as usize;
        for _ in 0..bound {
            let a = base_action(&st, &goal, 1.0, &ctl);
            step(&spec, &mut st, &a).unwrap();
            let e = (goal.position - st.ee_pose.position).norm();
            assert!(e < prev || e == 0.0);
            prev = e;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn fixture_base_policy_solves_pick_cube() {
        let spec = TaskSpec::builtin(TaskId::PickCubeMini);
        let plan = fixture_plan(TaskId::PickCubeMini);
        let (ctl, rule) = (PrimitiveController::default(), TerminationRule::default());
        let mut wins = 0;
        for seed in 0..20 {
            let mut st = reset(&spec, seed);
            let mut success = false;
            'outer: for s in &plan.steps {
                let obj = st.object_index(&s.object_id).unwrap();
                let g = parse_to_goal(&st.objects, &s.object_id, &s.affordances[0]).unwrap();
                let p = Primitive::new(s.kind, obj, g, &st);
                for _ in 0..100 {
                    let a = p.base_action(&st, &ctl, &rule);
                    let out = step(&spec, &mut st, &a).unwrap();
                    if out.done {
                        success = out.info.success;
                        break 'outer;
                    }
                    if p.done(&st, &rule) {
                        break;
                    }
                }
            }
            wins += success as usize;
        }
        assert_eq!(wins, 20);
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (
            (-0.25..0.55f64, -0.35..0.35f64, 0.05..0.45f64),
            prop::array::uniform3(-1.0..1.0f64),
            0.0..3.1f64,
        )
            .prop_map(|(p, a, ang)| {
                Pose::new(Vec3::new(p.0, p.1, p.2), Quat::from_axis_angle(Vec3::new(a[0], a[1], a[2] + 1e-3), ang))
            })
    }

    proptest! {
        #[test]
        fn translation_equivariant(ee in arb_pose(), goal in arb_pose(), v in prop::array::uniform3(-0.5..0.5f64)) {
            let ctl = PrimitiveController::default();
            let v = Vec3::from(v);
            let a = base_action(&free_state(ee), &goal, -1.0, &ctl);
            let shifted = Pose::new(ee.position + v, ee.orientation);
            let g2 = Pose::new(goal.position + v, goal.orientation);
            let b = base_action(&free_state(shifted), &g2, -1.0, &ctl);
            prop_assert!((a.delta_pos - b.delta_pos).max_abs() < 1e-12);
            prop_assert!((a.delta_rot - b.delta_rot).max_abs() < 1e-12);
        }

        #[test]
        fn pd_convergence_bound(ee in arb_pose(), goal in arb_pose()) {
            // rotation steps: each rotvec component shrinks by at least max_rot_step per step
            const K_ROT: usize = 64;
            let spec = TaskSpec::builtin(TaskId::PickCubeMini);
            let ctl = PrimitiveController::default();
            let mut st = free_state(ee);
            let dist = (goal.position - ee.position).norm();
            let budget = (dist / ctl.max_lin_step).ceil() as usize + K_ROT;
            for _ in 0..budget {
                let a = base_action(&st, &goal, 1.0, &ctl);
                prop_assert!(a.delta_pos.max_abs() <= ctl.max_lin_step);
                prop_assert!(a.delta_rot.max_abs() <= ctl.max_rot_step);
                step(&spec, &mut st, &a).unwrap();
            }
            let (dp, da) = st.ee_pose.distance(&goal);
            prop_assert!(dp < 1e-9 && da < 1e-9, "dp {} da {}", dp, da);
        }

        #[test]
        fn intrinsic_reward_monotone(e in 0.0..2.0f64, de in 0.0..1.0f64, v in 0.0..10.0f64, dv in 0.0..5.0f64) {
            let mut st = free_state(Pose::IDENTITY);
            st.joint_vel_proxy = [v, 0.0, 0.0, 0.0, 0.0, 0.0];
            let r0 = intrinsic_reward(&st, Vec3::new(e, 0.0, 0.0));
            let r1 = intrinsic_reward(&st, Vec3::new(e + de, 0.0, 0.0));
            st.joint_vel_proxy[0] = v + dv;
            let r2 = intrinsic_reward(&st, Vec3::new(e, 0.0, 0.0));
            prop_assert!(r1 <= r0 && r2 <= r0);
        }
    }
}
