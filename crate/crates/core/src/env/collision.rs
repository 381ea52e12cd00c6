//! Oriented-box overlap via the separating-axis theorem.
//!
//! Overlap is strict: boxes that only touch (projection intervals meeting at a
//! single point on some axis) are reported as disjoint.

use crate::geometry::{Pose, Quat, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedBox {
    pub center: Vec3,
    pub orientation: Quat,
    pub half_extents: Vec3,
}

impl OrientedBox {
    pub fn new(pose: Pose, half_extents: Vec3) -> Self {
        OrientedBox { center: pose.position, orientation: pose.orientation, half_extents }
    }

    pub fn axes(&self) -> [Vec3; 3] {
        [self.orientation.x_axis(), self.orientation.y_axis(), self.orientation.z_axis()]
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        let local = self.orientation.inverse().rotate(p - self.center);
        local.x.abs() <= self.half_extents.x
            && local.y.abs() <= self.half_extents.y
            && local.z.abs() <= self.half_extents.z
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let [ax, ay, az] = self.axes();
        let h = self.half_extents;
        let mut out = [Vec3::ZERO; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            *c = self.center + ax * (sx * h.x) + ay * (sy * h.y) + az * (sz * h.z);
        }
        out
    }

    fn sort_key(&self) -> [u64; 10] {
        let c = self.center;
        let q = self.orientation;
        let h = self.half_extents;
        [
            c.x.to_bits(),
            c.y.to_bits(),
            c.z.to_bits(),
            q.w.to_bits(),
            q.x.to_bits(),
            q.y.to_bits(),
            q.z.to_bits(),
            h.x.to_bits(),
            h.y.to_bits(),
            h.z.to_bits(),
        ]
    }
}

/// Projected radius of a box with `axes`/`half` onto direction `l`.
fn radius(axes: &[Vec3; 3], half: Vec3, l: Vec3) -> f64 {
    half.x * axes[0].dot(l).abs() + half.y * axes[1].dot(l).abs() + half.z * axes[2].dot(l).abs()
}

/// Strict overlap test for two oriented boxes.
///
/// The pair is put in a canonical order before testing so the floating-point
/// evaluation, and therefore the answer, is identical for `(a, b)` and `(b, a)`.
pub fn boxes_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let (a, b) = if a.sort_key() <= b.sort_key() { (a, b) } else { (b, a) };
    let aa = a.axes();
    let ba = b.axes();
    let t = b.center - a.center;

    let separated = |l: Vec3| -> bool {
        let ra = radius(&aa, a.half_extents, l);
        let rb = radius(&ba, b.half_extents, l);
        t.dot(l).abs() >= ra + rb
    };

    for l in aa.iter().chain(ba.iter()) {
        if separated(*l) {
            return false;
        }
    }
    for ea in &aa {
        for eb in &ba {
            let l = ea.cross(*eb);
            // parallel edge pairs are already covered by the face axes
            if l.norm() < 1e-9 {
                continue;
            }
            if separated(l.normalized()) {
                return false;
            }
        }
    }
    true
}
