use super::*;
use crate::geometry::SignedAxis;
use alloc::vec;
use proptest::prelude::*;

fn spec(t: TaskId) -> TaskSpec {
    TaskSpec::builtin(t)
}

fn zero() -> Action {
    Action::default()
}

/// Places the gripper exactly on the named grasp frame of `object`.
fn ee_on_frame(state: &mut EnvState, object: &str, frame: &str) {
    let o = state.object(object).unwrap();
    let f = o.grasp_frames.iter().find(|f| f.name == frame).unwrap();
    state.ee_pose = o.pose.compose(&f.pose);
}

#[test]
fn reset_is_deterministic() {
    let s = spec(TaskId::PickCubeMini);
    assert_eq!(reset(&s, 7), reset(&s, 7));
    assert_ne!(reset(&s, 7).objects[0].pose, reset(&s, 8).objects[0].pose);
}

#[test]
fn reset_respects_spawn_box() {
    for t in TaskId::ALL {
        let s = spec(t);
        for seed in 0..200 {
            let st = reset(&s, seed);
            for (o, tpl) in st.objects.iter().zip(&s.objects) {
                let p = o.pose.position;
                for k in 0..3 {
                    assert!(p.component(k) >= tpl.spawn.position_min.component(k));
                    assert!(p.component(k) <= tpl.spawn.position_max.component(k));
                }
                assert!(s.workspace.contains(p));
                assert_eq!(o.pose, o.initial_pose);
            }
        }
    }
}

#[test]
fn peg_never_spawns_in_block() {
    let s = spec(TaskId::PegInsertMini);
    for seed in 0..10_000 {
        let st = reset(&s, seed);
        let peg = st.object("peg").unwrap().bounding_box();
        // corner containment is checked independently of the SAT test
        for ob in &st.obstacles {
            for c in peg.corners() {
                assert!(!ob.contains_point(c), "seed {seed}");
            }
            assert!(!boxes_overlap(&peg, ob));
        }
        assert!(!collision_query(&s, &st));
    }
}

#[test]
fn zero_action_keeps_pose() {
    let s = spec(TaskId::PickCubeMini);
    let mut st = reset(&s, 3);
    let before = st.clone();
    let out = step(&s, &mut st, &zero()).unwrap();
    assert_eq!(st.ee_pose, before.ee_pose);
    assert_eq!(out.reward, 0.0);
    assert!(!out.done);
    assert_eq!(st.step_index, before.step_index + 1);
}

#[test]
fn non_finite_action_rejected() {
    let s = spec(TaskId::PickCubeMini);
    let mut st = reset(&s, 3);
    let bad = Action { delta_rot: Vec3::new(0.0, f64::NAN, 0.0), ..zero() };
    assert_eq!(step(&s, &mut st, &bad), Err(EnvError::InvalidAction { component: 4 }));
    assert_eq!(st.step_index, 0);
}

#[test]
fn clipping_limits_displacement() {
    let s = spec(TaskId::PickCubeMini);
    let mut st = reset(&s, 3);
    let a = Action { delta_pos: Vec3::new(1.0, -1.0, 0.003), delta_rot: Vec3::new(0.0, 0.0, 2.0), grip: 5.0 };
    let p0 = st.ee_pose;
    step(&s, &mut st, &a).unwrap();
    let d = st.ee_pose.position - p0.position;
    assert!((d - Vec3::new(0.01, -0.01, 0.003)).norm() < 1e-15);
    assert!((p0.orientation.angle_to(st.ee_pose.orientation) - 0.05).abs() < 1e-12);
    assert!((st.joint_vel_proxy[0] - 0.1).abs() < 1e-12);
    assert!((st.joint_vel_proxy[5] - 0.5).abs() < 1e-12);
}

#[test]
fn grasp_attaches_and_follows_rigidly() {
    let s = spec(TaskId::PickCubeMini);
    let mut st = reset(&s, 11);
    ee_on_frame(&mut st, "cube", "top");
    // nudge within tolerance
    st.ee_pose.position += Vec3::new(0.005, 0.0, 0.0);
    step(&s, &mut st, &Action { grip: -1.0, ..zero() }).unwrap();
    assert!(st.object("cube").unwrap().attached);
    let rel0 = st.ee_pose.relative(&st.object("cube").unwrap().pose);
    let moves = [
        Action { delta_pos: Vec3::new(0.0, 0.0, 0.01), delta_rot: Vec3::new(0.03, 0.0, 0.0), grip: -1.0 },
        Action { delta_pos: Vec3::new(0.01, 0.004, 0.0), delta_rot: Vec3::new(0.0, -0.02, 0.05), grip: -0.2 },
    ];
    for a in moves.iter().cycle().take(8) {
        step(&s, &mut st, a).unwrap();
        let rel = st.ee_pose.relative(&st.object("cube").unwrap().pose);
        let (dp, da) = rel.distance(&rel0);
        assert!(dp < 1e-9 && da < 1e-9);
    }
    step(&s, &mut st, &Action { grip: 1.0, ..zero() }).unwrap();
    assert!(!st.object("cube").unwrap().attached);
    let parked = st.object("cube").unwrap().pose;
    step(&s, &mut st, &Action { delta_pos: Vec3::new(0.01, 0.0, 0.0), ..zero() }).unwrap();
    assert_eq!(st.object("cube").unwrap().pose, parked);
}

#[test]
fn grasp_out_of_tolerance_does_not_attach() {
    let s = spec(TaskId::PickCubeMini);
    let mut st = reset(&s, 11);
    ee_on_frame(&mut st, "cube", "top");
    st.ee_pose.position += Vec3::new(0.0, 0.0, 0.02);
    step(&s, &mut st, &Action { grip: -1.0, ..zero() }).unwrap();
    assert!(st.grasp.is_none());
    assert_eq!(st.gripper, 0.0);
}

#[test]
fn tilt_violation_penalized() {
    let s = spec(TaskId::PutBoxMini);
    let mut st = reset(&s, 5);
    ee_on_frame(&mut st, "box", "side");
    step(&s, &mut st, &Action { grip: -1.0, ..zero() }).unwrap();
    assert!(st.grasp.is_some());
    let up = |st: &EnvState| {
        let z = st.object("box").unwrap().pose.orientation.z_axis();
        libm::acos(z.z.clamp(-1.0, 1.0))
    };
    let mut penalties = vec![];
    loop {
        let a = Action { delta_rot: Vec3::new(0.0, 0.05, 0.0), grip: -1.0, ..zero() };
        let out = step(&s, &mut st, &a).unwrap();
        if up(&st) > deg(30.0) {
            assert!(st.tilt_violation);
            assert!(out.info.tilt_violation);
            penalties.push(out.reward);
            assert!(out.done);
            break;
        }
        assert!(!st.tilt_violation);
        assert_eq!(out.reward, 0.0);
    }
    assert_eq!(penalties, vec![-5.0]);
}

#[test]
fn collision_queries() {
    let s = spec(TaskId::PutBoxMini);
    let mut st = reset(&s, 2);
    assert!(!collision_query(&s, &st));
    let ceiling = st.obstacles[0];
    st.ee_pose = Pose::new(ceiling.center, top_down());
    st.ee_pose.position.z -= 0.03;
    assert!(collision_query(&s, &st));
}

#[test]
fn gripper_face_contact_is_not_collision() {
    let s = spec(TaskId::PegInsertMini);
    let mut st = reset(&s, 2);
    let top_block = st.obstacles[0];
    // gripper body bottom face sits exactly on the block top face
    let top = top_block.center.z + top_block.half_extents.z;
    st.ee_pose = Pose::new(Vec3::new(top_block.center.x, top_block.center.y, top), top_down());
    let g = gripper_box(&s, &st.ee_pose);
    assert_eq!(g.center.z - g.half_extents.z, top);
    assert!(!collision_query(&s, &st));
    st.ee_pose.position.z -= 1e-6;
    assert!(collision_query(&s, &st));
}

#[test]
fn carried_object_collision() {
    let s = spec(TaskId::PegInsertMini);
    let mut st = reset(&s, 4);
    ee_on_frame(&mut st, "peg", "head");
    step(&s, &mut st, &Action { grip: -1.0, ..zero() }).unwrap();
    let hole = st.object("hole").unwrap().pose;
    let g = st.grasp.unwrap();
    // peg centered on the block top, far above the channel
    let target = Pose::new(hole.position + Vec3::new(0.0, 0.0, 0.04), Quat::IDENTITY);
    st.objects[g.object].pose = target;
    assert!(collision_query(&s, &st));
}

#[test]
fn success_predicates() {
    let s = spec(TaskId::PickCubeMini);
    let mut st = reset(&s, 1);
    let goal = st.object("goal").unwrap().pose.position;
    st.objects[0].pose.position = goal;
    assert!(check_success(&st, &s));
    st.objects[0].pose.position = goal + Vec3::new(0.0, 0.026, 0.0);
    assert!(!check_success(&st, &s));

    let s = spec(TaskId::PegInsertMini);
    let mut st = reset(&s, 1);
    let hole = st.object("hole").unwrap().pose;
    let peg = st.object_index("peg").unwrap();
    st.objects[peg].pose = hole.compose(&Pose::from_position(Vec3::new(-0.05, 0.0, 0.0)));
    assert!(check_success(&st, &s));
    st.objects[peg].pose.orientation = hole.orientation * Quat::from_axis_angle(Vec3::Z, core::f64::consts::FRAC_PI_2);
    assert!(!check_success(&st, &s));
    st.objects[peg].pose = hole.compose(&Pose::from_position(Vec3::new(-0.08, 0.0, 0.0)));
    assert!(!check_success(&st, &s), "too shallow");

    let s = spec(TaskId::PutBoxMini);
    let mut st = reset(&s, 1);
    let cup = st.object("cupboard").unwrap().pose;
    let b = st.object_index("box").unwrap();
    st.objects[b].pose = Pose::new(cup.position - Vec3::new(0.0, 0.0, 0.005), Quat::IDENTITY);
    assert!(check_success(&st, &s));
    st.tilt_violation = true;
    assert!(!check_success(&st, &s));
    st.tilt_violation = false;
    st.objects[b].attached = true;
    assert!(!check_success(&st, &s));
}

#[test]
fn success_rewarded_once_then_done() {
    let s = spec(TaskId::PickCubeMini);
    let mut st = reset(&s, 9);
    ee_on_frame(&mut st, "cube", "top");
    step(&s, &mut st, &Action { grip: -1.0, ..zero() }).unwrap();
    let goal = st.object("goal").unwrap().pose.position;
    let mut total = 0.0;
    for _ in 0..199 {
        let cube = st.object("cube").unwrap().pose.position;
        let a = Action { delta_pos: goal - cube, grip: -1.0, ..zero() };
        let out = step(&s, &mut st, &a).unwrap();
        total += out.reward;
        if out.done {
            assert!(out.info.success && out.terminal());
            break;
        }
    }
    assert_eq!(total, 10.0);
    assert_eq!(step(&s, &mut st, &zero()), Err(EnvError::EpisodeFinished));
}

#[test]
fn timeout_truncates() {
    let s = spec(TaskId::PickCubeMini);
    let mut st = reset(&s, 9);
    for i in 0..200 {
        let out = step(&s, &mut st, &zero()).unwrap();
        assert_eq!(out.done, i == 199);
        if out.done {
            assert!(out.info.truncated && !out.terminal());
        }
    }
}

#[test]
fn end_grasp_insertion_collides() {
    let s = spec(TaskId::PegInsertMini);
    let mut st = reset(&s, 6);
    ee_on_frame(&mut st, "peg", "end");
    step(&s, &mut st, &Action { grip: -1.0, ..zero() }).unwrap();
    let hole = st.object("hole").unwrap().pose;
    let mut hit = false;
    for _ in 0..199 {
        let peg = st.object("peg").unwrap().pose;
        let want = hole.compose(&Pose::from_position(Vec3::new(-0.05, 0.0, 0.0)));
        let a = Action {
            delta_pos: want.position - peg.position,
            delta_rot: st.ee_pose.orientation.inverse().rotate((want.orientation * peg.orientation.inverse()).to_rotvec()),
            grip: -1.0,
        };
        let out = step(&s, &mut st, &a).unwrap();
        if out.done {
            hit = out.info.collision;
            break;
        }
    }
    assert!(hit);
}

#[test]
fn observation_layout() {
    for t in TaskId::ALL {
        let s = spec(t);
        let st = reset(&s, 0);
        let g = st.ee_pose;
        let o = observe(&st, Some(0), &g);
        assert_eq!(o.len(), OBS_DIM);
        assert_eq!(&o[22..25], &[0.0, 0.0, 0.0]);
        assert_eq!(o, observe(&st, Some(0), &g));
        assert_eq!(o[7], 1.0);
        assert_eq!(o[25], 0.0);
        let p = st.objects[0].pose.position * OBS_POSITION_SCALE;
        assert_eq!(&o[8..11], &p.to_array());
    }
}

#[test]
fn axis_tokens_used_by_insert() {
    let s = spec(TaskId::PegInsertMini);
    match s.success {
        SuccessSpec::Insert { object_axis, hole_axis, .. } => {
            assert_eq!(object_axis, SignedAxis::PosX);
            assert_eq!(hole_axis, SignedAxis::PosX);
        }
        _ => unreachable!(),
    }
}

fn arb_action() -> impl Strategy<Value = Action> {
    (prop::array::uniform7(-0.03..0.03f64), -1.0..1.0f64).prop_map(|(a, g)| Action {
        delta_pos: Vec3::new(a[0], a[1], a[2]),
        delta_rot: Vec3::new(a[3] * 3.0, a[4] * 3.0, a[5] * 3.0),
        grip: g,
    })
}

fn run(s: &TaskSpec, seed: u64, actions: &[Action]) -> (EnvState, Vec<StepOutcome>) {
    let mut st = reset(s, seed);
    let mut outs = Vec::new();
    for a in actions {
        if st.done {
            break;
        }
        outs.push(step(s, &mut st, a).unwrap());
    }
    (st, outs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deterministic_rollouts(seed in 0u64..1000, actions in prop::collection::vec(arb_action(), 1..60), t in 0usize..3) {
        let s = spec(TaskId::ALL[t]);
        let (a, oa) = run(&s, seed, &actions);
        let (b, ob) = run(&s, seed, &actions);
        prop_assert_eq!(a, b);
        prop_assert_eq!(oa, ob);
    }

    #[test]
    fn per_step_displacement_clipped(seed in 0u64..1000, actions in prop::collection::vec(arb_action(), 1..40)) {
        let s = spec(TaskId::PickCubeMini);
        let mut st = reset(&s, seed);
        for a in &actions {
            if st.done { break; }
            let before = st.ee_pose;
            let idx = st.step_index;
            step(&s, &mut st, a).unwrap();
            prop_assert_eq!(st.step_index, idx + 1);
            prop_assert!((st.ee_pose.position - before.position).max_abs() <= 0.01 + 1e-15);
            let rv = before.orientation.inverse() * st.ee_pose.orientation;
            prop_assert!(rv.to_rotvec().max_abs() <= 0.05 + 1e-12);
            prop_assert!((0.0..=1.0).contains(&st.gripper));
        }
    }

    #[test]
    fn rewards_are_sparse(seed in 0u64..1000, actions in prop::collection::vec(arb_action(), 1..200), t in 0usize..3) {
        let s = spec(TaskId::ALL[t]);
        let (_, outs) = run(&s, seed, &actions);
        let mut successes = 0;
        for o in &outs {
            prop_assert!(o.reward == 0.0 || o.reward == 10.0 || o.reward == -5.0);
            if o.reward == 10.0 { successes += 1; }
        }
        prop_assert!(successes <= 1);
    }

    #[test]
    fn rigid_grasp_drift(seed in 0u64..1000, actions in prop::collection::vec(arb_action(), 1..80)) {
        let s = spec(TaskId::PutBoxMini);
        let mut st = reset(&s, seed);
        ee_on_frame(&mut st, "box", "side");
        step(&s, &mut st, &Action { grip: -1.0, ..Action::default() }).unwrap();
        let b = st.object_index("box").unwrap();
        let rel0 = st.ee_pose.relative(&st.objects[b].pose);
        for a in &actions {
            if st.done { break; }
            let a = Action { grip: -1.0, ..*a };
            step(&s, &mut st, &a).unwrap();
            let (dp, da) = st.ee_pose.relative(&st.objects[b].pose).distance(&rel0);
            prop_assert!(dp < 1e-9 && da < 1e-9);
        }
    }
}
