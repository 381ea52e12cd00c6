//! Rigid-body primitives: 3-vectors, unit quaternions (scalar first) and SE(3) poses.
//!
//! Every operation producing a quaternion renormalizes its result, so norms stay
//! within 1e-9 of one no matter how many compositions are chained.

use core::fmt;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self * (1.0 / n)
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn component(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn zip_map(self, o: Vec3, f: impl Fn(f64, f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x, o.x), f(self.y, o.y), f(self.z, o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Clamps every component into `[-limit, limit]`.
    pub fn clamp_abs(self, limit: f64) -> Vec3 {
        self.map(|v| v.clamp(-limit, limit))
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion, scalar first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl From<[f64; 4]> for Quat {
    fn from(a: [f64; 4]) -> Self {
        Quat { w: a[0], x: a[1], y: a[2], z: a[3] }
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        q.to_array()
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Inverse of a unit quaternion.
    pub fn inverse(self) -> Quat {
        self.conjugate()
    }

    /// Sign-canonical form with `w >= 0` (q and -q are the same rotation).
    pub fn canonical(self) -> Quat {
        if self.w < 0.0 {
            Quat::new(-self.w, -self.x, -self.y, -self.z)
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotation about `axis` (need not be unit) by `angle` radians.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        let a = axis.normalized();
        let (s, c) = (libm::sin(0.5 * angle), libm::cos(0.5 * angle));
        Quat::new(c, a.x * s, a.y * s, a.z * s).normalized()
    }

    /// Exponential map of a rotation vector (axis * angle).
    pub fn from_rotvec(v: Vec3) -> Quat {
        let angle = v.norm();
        if angle < 1e-12 {
            // second-order expansion keeps tiny rotations exact to rounding
            return Quat::new(1.0, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z).normalized();
        }
        Quat::from_axis_angle(v, angle)
    }

    /// Logarithm map: the shortest rotation vector reproducing this rotation.
    pub fn to_rotvec(self) -> Vec3 {
        let q = self.canonical();
        let s = libm::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
        if s < 1e-12 {
            return Vec3::new(2.0 * q.x, 2.0 * q.y, 2.0 * q.z);
        }
        let angle = 2.0 * libm::atan2(s, q.w);
        Vec3::new(q.x, q.y, q.z) * (angle / s)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(self) -> f64 {
        self.to_rotvec().norm()
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn x_axis(self) -> Vec3 {
        self.rotate(Vec3::X)
    }

    pub fn y_axis(self) -> Vec3 {
        self.rotate(Vec3::Y)
    }

    pub fn z_axis(self) -> Vec3 {
        self.rotate(Vec3::Z)
    }

    /// Builds the rotation whose matrix columns are `x`, `y`, `z`.
    /// The columns must form a right-handed orthonormal frame.
    pub fn from_columns(x: Vec3, y: Vec3, z: Vec3) -> Quat {
        let (m00, m01, m02) = (x.x, y.x, z.x);
        let (m10, m11, m12) = (x.y, y.y, z.y);
        let (m20, m21, m22) = (x.z, y.z, z.z);
        let trace = m00 + m11 + m22;
        let q = if trace > 0.0 {
            let s = libm::sqrt(trace + 1.0) * 2.0;
            Quat::new(0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
        } else if m00 > m11 && m00 > m22 {
            let s = libm::sqrt(1.0 + m00 - m11 - m22) * 2.0;
            Quat::new((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s)
        } else if m11 > m22 {
            let s = libm::sqrt(1.0 + m11 - m00 - m22) * 2.0;
            Quat::new((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s)
        } else {
            let s = libm::sqrt(1.0 + m22 - m00 - m11) * 2.0;
            Quat::new((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s)
        };
        q.normalized().canonical()
    }

    /// Angle between this rotation and `other`, in `[0, pi]`.
    pub fn angle_to(self, other: Quat) -> f64 {
        (self.inverse() * other).angle()
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
        .normalized()
    }
}

/// Element of SE(3): a frame located at `position` with rotation `orientation`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { position: Vec3::ZERO, orientation: Quat::IDENTITY };

    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Pose { position, orientation: orientation.normalized() }
    }

    pub fn from_position(position: Vec3) -> Self {
        Pose { position, orientation: Quat::IDENTITY }
    }

    /// `self ∘ other`: expresses `other` (given in this frame) in the parent frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation.rotate(other.position),
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose { position: -inv.rotate(self.position), orientation: inv.normalized() }
    }

    /// Pose of `other` relative to this frame, `self⁻¹ ∘ other`.
    pub fn relative(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.position + self.orientation.rotate(p)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.orientation.is_finite()
    }

    /// Combined translation / rotation distance used by tolerance checks.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        (
            (self.position - other.position).norm(),
            self.orientation.angle_to(other.orientation),
        )
    }
}

/// Signed principal axis token, `+x` … `-z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "alloc::string::String", into = "&'static str")]
pub enum SignedAxis {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl SignedAxis {
    pub const ALL: [SignedAxis; 6] = [
        SignedAxis::PosX,
        SignedAxis::NegX,
        SignedAxis::PosY,
        SignedAxis::NegY,
        SignedAxis::PosZ,
        SignedAxis::NegZ,
    ];

    pub fn vector(self) -> Vec3 {
        match self {
            SignedAxis::PosX => Vec3::X,
            SignedAxis::NegX => -Vec3::X,
            SignedAxis::PosY => Vec3::Y,
            SignedAxis::NegY => -Vec3::Y,
            SignedAxis::PosZ => Vec3::Z,
            SignedAxis::NegZ => -Vec3::Z,
        }
    }

    /// Index of the unsigned axis (0 = x, 1 = y, 2 = z).
    pub fn index(self) -> usize {
        match self {
            SignedAxis::PosX | SignedAxis::NegX => 0,
            SignedAxis::PosY | SignedAxis::NegY => 1,
            SignedAxis::PosZ | SignedAxis::NegZ => 2,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            SignedAxis::PosX | SignedAxis::PosY | SignedAxis::PosZ => 1.0,
            _ => -1.0,
        }
    }

    pub fn is_orthogonal_to(self, other: SignedAxis) -> bool {
        self.index() != other.index()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignedAxis::PosX => "+x",
            SignedAxis::NegX => "-x",
            SignedAxis::PosY => "+y",
            SignedAxis::NegY => "-y",
            SignedAxis::PosZ => "+z",
            SignedAxis::NegZ => "-z",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxisTokenError;

impl fmt::Display for AxisTokenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("axis token must be one of +x, -x, +y, -y, +z, -z")
    }
}

impl FromStr for SignedAxis {
    type Err = AxisTokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SignedAxis::ALL.into_iter().find(|a| a.as_str() == s).ok_or(AxisTokenError)
    }
}

impl TryFrom<&str> for SignedAxis {
    type Error = AxisTokenError;
    fn try_from(s: &str) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl TryFrom<alloc::string::String> for SignedAxis {
    type Error = AxisTokenError;
    fn try_from(s: alloc::string::String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SignedAxis> for &'static str {
    fn from(a: SignedAxis) -> Self {
        a.as_str()
    }
}

impl fmt::Display for SignedAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;
    use proptest::prelude::*;

    fn arb_quat() -> impl Strategy<Value = Quat> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Quat::new(w, x, y, z).normalized())
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, arb_quat())
            .prop_map(|(x, y, z, q)| Pose::new(Vec3::new(x, y, z), q))
    }

    fn close(a: &Pose, b: &Pose, tol: f64) -> bool {
        let (dp, da) = a.distance(b);
        dp < tol && da < tol
    }

    #[test]
    fn axis_angle_roundtrip() {
        let q = Quat::from_axis_angle(Vec3::Z, FRAC_PI_2);
        let v = q.rotate(Vec3::X);
        assert!((v - Vec3::Y).norm() < 1e-15);
        let r = q.to_rotvec();
        assert!((r - Vec3::Z * FRAC_PI_2).norm() < 1e-15);
    }

    #[test]
    fn from_columns_matches_axes() {
        let x = Vec3::new(0.0, 0.0, -1.0);
        let y = Vec3::Y;
        let z = x.cross(y);
        let q = Quat::from_columns(x, y, z);
        assert!((q.x_axis() - x).norm() < 1e-12);
        assert!((q.y_axis() - y).norm() < 1e-12);
        assert!((q.z_axis() - z).norm() < 1e-12);
    }

    #[test]
    fn axis_tokens_parse() {
        for a in SignedAxis::ALL {
            assert_eq!(a.as_str().parse::<SignedAxis>().unwrap(), a);
        }
        assert!("x".parse::<SignedAxis>().is_err());
        assert!(SignedAxis::PosX.is_orthogonal_to(SignedAxis::NegY));
        assert!(!SignedAxis::PosX.is_orthogonal_to(SignedAxis::NegX));
    }

    proptest! {
        #[test]
        fn compose_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!(close(&l, &r, 1e-9));
        }

        #[test]
        fn inverse_is_identity(a in arb_pose()) {
            let id = a.inverse().compose(&a);
            prop_assert!(close(&id, &Pose::IDENTITY, 1e-9));
            prop_assert!((id.orientation.norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn norms_stay_unit(a in arb_pose(), b in arb_pose()) {
            let mut p = a;
            for _ in 0..1000 {
                p = p.compose(&b);
            }
            prop_assert!((p.orientation.norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rotvec_roundtrip(q in arb_quat()) {
            let back = Quat::from_rotvec(q.to_rotvec());
            prop_assert!(q.angle_to(back) < 1e-9);
        }
    }
}
