//! Geometric and temporal primitives shared by every analysis stage.
//!
//! All spatial data lives in one right-handed camera frame: x to the right,
//! y up, z pointing from the camera toward the observed person. Lengths are
//! in meters, pixel quantities in pixels, angles in radians.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vectors shorter than this are treated as having no direction.
pub const DEGENERATE_EPS: f64 = 1e-9;

/// Smallest admissible depth for a projected point.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("vector is too short to have a direction (|v| = {0:e})")]
    DegenerateVector(f64),
    #[error("point lies behind the camera (depth {0})")]
    BehindCamera(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid timestamp {0}: must be finite and non-negative")]
    InvalidTimestamp(f64),
    #[error("unknown joint identifier {0:?}")]
    UnknownJoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
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
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Vec3) -> Vec3 {
        cross(*self, *other)
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        (*self - *other).norm()
    }

    pub fn normalize(&self) -> Result<Vec3, GeometryError> {
        normalize(*self)
    }

    pub fn to_na(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_na(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit vector in the direction of `v`.
pub fn normalize(v: Vec3) -> Result<Vec3, GeometryError> {
    let n = v.norm();
    if n <= DEGENERATE_EPS || !n.is_finite() {
        return Err(GeometryError::DegenerateVector(n));
    }
    Ok(v / n)
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    Vec3::new(
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        a.x * b.y - a.y * b.x,
    )
}

/// Unsigned angle between two directions, in `[0, π]`.
pub fn angle_between(a: Vec3, b: Vec3) -> Result<f64, GeometryError> {
    let a = normalize(a)?;
    let b = normalize(b)?;
    Ok(unit_angle(a, b))
}

/// Angle between two unit vectors. Equals `acos(a·b)` but keeps full
/// precision near 0 and π.
pub fn unit_angle(a: Vec3, b: Vec3) -> f64 {
    cross(a, b).norm().atan2(a.dot(&b))
}

/// `acos` with its argument clamped to `[-1, 1]`.
pub fn clamped_acos(c: f64) -> f64 {
    c.clamp(-1.0, 1.0).acos()
}

/// Seconds since the start of a trace.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(f64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0.0);

    pub fn new(seconds: f64) -> Result<Self, GeometryError> {
        if !seconds.is_finite() || seconds < 0.0 {
            return Err(GeometryError::InvalidTimestamp(seconds));
        }
        Ok(Self(seconds))
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    /// Seconds elapsed from `earlier` to `self` (negative when out of order).
    pub fn since(self, earlier: Timestamp) -> f64 {
        self.0 - earlier.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}s", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// Sign of the outward lateral direction in the camera frame. The person
    /// faces the camera, so their left side appears at +x.
    pub fn outward_sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointId {
    Head,
    Neck,
    Torso,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHand,
    RightHand,
    LeftHip,
    RightHip,
}

impl JointId {
    pub const ALL: [JointId; 13] = [
        JointId::Head,
        JointId::Neck,
        JointId::Torso,
        JointId::LeftShoulder,
        JointId::RightShoulder,
        JointId::LeftElbow,
        JointId::RightElbow,
        JointId::LeftWrist,
        JointId::RightWrist,
        JointId::LeftHand,
        JointId::RightHand,
        JointId::LeftHip,
        JointId::RightHip,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JointId::Head => "head",
            JointId::Neck => "neck",
            JointId::Torso => "torso",
            JointId::LeftShoulder => "left_shoulder",
            JointId::RightShoulder => "right_shoulder",
            JointId::LeftElbow => "left_elbow",
            JointId::RightElbow => "right_elbow",
            JointId::LeftWrist => "left_wrist",
            JointId::RightWrist => "right_wrist",
            JointId::LeftHand => "left_hand",
            JointId::RightHand => "right_hand",
            JointId::LeftHip => "left_hip",
            JointId::RightHip => "right_hip",
        }
    }

    /// Body side of a limb joint; `None` for midline joints.
    pub fn side(self) -> Option<Side> {
        use JointId::*;
        match self {
            LeftShoulder | LeftElbow | LeftWrist | LeftHand | LeftHip => Some(Side::Left),
            RightShoulder | RightElbow | RightWrist | RightHand | RightHip => Some(Side::Right),
            Head | Neck | Torso => None,
        }
    }

    pub fn shoulder(side: Side) -> JointId {
        match side {
            Side::Left => JointId::LeftShoulder,
            Side::Right => JointId::RightShoulder,
        }
    }

    pub fn elbow(side: Side) -> JointId {
        match side {
            Side::Left => JointId::LeftElbow,
            Side::Right => JointId::RightElbow,
        }
    }

    pub fn wrist(side: Side) -> JointId {
        match side {
            Side::Left => JointId::LeftWrist,
            Side::Right => JointId::RightWrist,
        }
    }

    pub fn hand(side: Side) -> JointId {
        match side {
            Side::Left => JointId::LeftHand,
            Side::Right => JointId::RightHand,
        }
    }

    pub fn hip(side: Side) -> JointId {
        match side {
            Side::Left => JointId::LeftHip,
            Side::Right => JointId::RightHip,
        }
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JointId {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JointId::ALL
            .into_iter()
            .find(|j| j.as_str() == s)
            .ok_or_else(|| GeometryError::UnknownJoint(s.to_string()))
    }
}

/// Joint positions of one person at one instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkeletonFrame {
    pub timestamp: Timestamp,
    pub joints: BTreeMap<JointId, Vec3>,
    pub confidence: BTreeMap<JointId, f64>,
}

impl SkeletonFrame {
    pub fn new(timestamp: Timestamp) -> Self {
        Self {
            timestamp,
            ..Default::default()
        }
    }

    pub fn with_joint(mut self, id: JointId, p: Vec3) -> Self {
        self.joints.insert(id, p);
        self
    }

    pub fn joint(&self, id: JointId) -> Option<Vec3> {
        self.joints.get(&id).copied()
    }

    /// Confidence of a joint; joints without an explicit value are fully trusted.
    pub fn confidence_of(&self, id: JointId) -> f64 {
        self.confidence.get(&id).copied().unwrap_or(1.0)
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        let mut out = self.clone();
        for p in out.joints.values_mut() {
            *p += offset;
        }
        out
    }
}

/// Pinhole camera parameters (no distortion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(GeometryError::InvalidIntrinsics(
                "principal point must be finite".into(),
            ));
        }
        Ok(())
    }
}

impl Default for CameraIntrinsics {
    /// A 1280x720 sensor with a roughly 70° horizontal field of view.
    fn default() -> Self {
        Self {
            fx: 900.0,
            fy: 900.0,
            cx: 640.0,
            cy: 360.0,
        }
    }
}

/// Rotation followed by translation, mapping model coordinates into the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    #[serde(with = "rows")]
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    /// Builds a pose from intrinsic yaw (about y), then pitch (about x), then roll (about z).
    pub fn from_yaw_pitch_roll(yaw: f64, pitch: f64, roll: f64, translation: Vec3) -> Self {
        Self::new(rotation_from_ypr(yaw, pitch, roll), translation)
    }

    pub fn transform(&self, p: Vec3) -> Vec3 {
        Vec3::from_na(&(self.rotation * p.to_na())) + self.translation
    }

    /// `(yaw, pitch, roll)` under the intrinsic y-x-z convention.
    pub fn yaw_pitch_roll(&self) -> (f64, f64, f64) {
        ypr_from_rotation(&self.rotation)
    }

    /// True when the rotation is orthonormal with determinant +1 within `tol`.
    pub fn is_proper_rotation(&self, tol: f64) -> bool {
        let r = &self.rotation;
        let gram = r.transpose() * r - Matrix3::identity();
        gram.iter().all(|e| e.abs() <= tol) && (r.determinant() - 1.0).abs() <= tol
    }

    /// Geodesic angle between the rotations of two poses, radians.
    pub fn rotation_distance(&self, other: &RigidPose) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let c = (rel.trace() - 1.0) / 2.0;
        // acos loses precision near zero; recover the angle from the skew part.
        let skew = Vector3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        );
        (skew.norm() / 2.0).atan2(c)
    }
}

pub fn rotation_from_ypr(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw);
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), pitch);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), roll);
    (ry * rx * rz).into_inner()
}

pub fn ypr_from_rotation(r: &Matrix3<f64>) -> (f64, f64, f64) {
    // R = Ry(yaw) Rx(pitch) Rz(roll): R[1][2] = -sin(pitch).
    let pitch = (-r[(1, 2)]).clamp(-1.0, 1.0).asin();
    let yaw = r[(0, 2)].atan2(r[(2, 2)]);
    let roll = r[(1, 0)].atan2(r[(1, 1)]);
    (yaw, pitch, roll)
}

/// Pinhole projection of a model point under `pose`.
pub fn project_point(
    p: Vec3,
    pose: &RigidPose,
    k: &CameraIntrinsics,
) -> Result<(f64, f64), GeometryError> {
    let c = pose.transform(p);
    if !(c.z > MIN_DEPTH) {
        return Err(GeometryError::BehindCamera(c.z));
    }
    Ok((k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy))
}

mod rows {
    use nalgebra::Matrix3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix3<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix3<f64>, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Ok(Matrix3::from_fn(|i, j| rows[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(v(3.0, 0.0, 4.0)).unwrap();
        assert_abs_diff_eq!(n.x, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(n.z, 0.8, epsilon = 1e-15);
        assert_eq!(normalize(Vec3::Y).unwrap(), Vec3::Y);
        assert!(matches!(
            normalize(Vec3::ZERO),
            Err(GeometryError::DegenerateVector(_))
        ));
        assert!(normalize(v(1e-10, 0.0, 0.0)).is_err());
    }

    #[test]
    fn cross_examples() {
        assert_eq!(cross(Vec3::X, Vec3::Y), Vec3::Z);
        assert_eq!(cross(Vec3::X, v(2.0, 0.0, 0.0)), Vec3::ZERO);
        assert_eq!(cross(v(0.0, 0.0, -1.0), Vec3::X), v(0.0, -1.0, 0.0));
    }

    #[test]
    fn angle_examples() {
        assert_eq!(angle_between(Vec3::X, v(2.0, 0.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(angle_between(Vec3::X, Vec3::Y).unwrap(), FRAC_PI_2);
        assert_abs_diff_eq!(angle_between(Vec3::X, -Vec3::X).unwrap(), PI);
        assert!(angle_between(Vec3::ZERO, Vec3::X).is_err());
    }

    #[test]
    fn project_examples() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let pose = RigidPose::from_translation(v(0.0, 0.0, 1.5));
        assert_eq!(
            project_point(Vec3::ZERO, &pose, &k).unwrap(),
            (320.0, 240.0)
        );
        let (u, vv) = project_point(v(0.15, 0.0, 0.0), &pose, &k).unwrap();
        assert_abs_diff_eq!(u, 370.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vv, 240.0, epsilon = 1e-12);
        assert!(matches!(
            project_point(v(0.0, 0.0, -2.0), &pose, &k),
            Err(GeometryError::BehindCamera(_))
        ));
    }

    #[test]
    fn intrinsics_reject_nonpositive_focal() {
        assert!(CameraIntrinsics::new(0.0, 500.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(500.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn joint_names_round_trip() {
        for j in JointId::ALL {
            assert_eq!(j.as_str().parse::<JointId>().unwrap(), j);
            let json = serde_json::to_string(&j).unwrap();
            assert_eq!(json, format!("\"{}\"", j.as_str()));
        }
        assert!("left_knee".parse::<JointId>().is_err());
    }

    #[test]
    fn euler_round_trip() {
        let (y, p, r) = (0.4, -0.3, 0.2);
        let pose = RigidPose::from_yaw_pitch_roll(y, p, r, Vec3::ZERO);
        assert!(pose.is_proper_rotation(1e-12));
        let (y2, p2, r2) = pose.yaw_pitch_roll();
        assert_abs_diff_eq!(y, y2, epsilon = 1e-12);
        assert_abs_diff_eq!(p, p2, epsilon = 1e-12);
        assert_abs_diff_eq!(r, r2, epsilon = 1e-12);
    }

    #[test]
    fn yaw_rotates_about_vertical() {
        let pose = RigidPose::from_yaw_pitch_roll(FRAC_PI_2, 0.0, 0.0, Vec3::ZERO);
        let p = pose.transform(Vec3::Z);
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_distance_small_angles() {
        let a = RigidPose::from_yaw_pitch_roll(0.0, 0.0, 0.0, Vec3::ZERO);
        let b = RigidPose::from_yaw_pitch_roll(1e-7, 0.0, 0.0, Vec3::ZERO);
        assert_abs_diff_eq!(a.rotation_distance(&b), 1e-7, epsilon = 1e-15);
    }

    fn arb_vec() -> impl Strategy<Value = Vec3> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| v(x, y, z))
    }

    proptest! {
        #[test]
        fn lagrange_identity(a in arb_vec(), b in arb_vec()) {
            let lhs = cross(a, b).norm_squared() + a.dot(&b).powi(2);
            let rhs = a.norm_squared() * b.norm_squared();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-12));
        }

        #[test]
        fn cross_is_orthogonal(a in arb_vec(), b in arb_vec()) {
            let c = cross(a, b);
            let scale = a.norm() * b.norm();
            prop_assert!(c.dot(&a).abs() <= 1e-9 * scale * a.norm().max(1.0));
            prop_assert!(c.dot(&b).abs() <= 1e-9 * scale * b.norm().max(1.0));
        }

        #[test]
        fn angle_symmetric_and_scale_invariant(a in arb_vec(), b in arb_vec(), s in 0.01..100.0f64) {
            prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
            let ab = angle_between(a, b).unwrap();
            prop_assert!((0.0..=PI).contains(&ab));
            prop_assert_eq!(ab, angle_between(b, a).unwrap());
            prop_assert!((ab - angle_between(a * s, b).unwrap()).abs() < 1e-7);
        }

        #[test]
        fn optical_axis_projects_to_principal_point(d in 1e-3..100.0f64) {
            let k = CameraIntrinsics::new(500.0, 480.0, 320.5, 239.25).unwrap();
            let pose = RigidPose::from_translation(v(0.0, 0.0, d));
            prop_assert_eq!(project_point(Vec3::ZERO, &pose, &k).unwrap(), (320.5, 239.25));
        }

        #[test]
        fn normalize_has_unit_length(a in arb_vec()) {
            prop_assume!(a.norm() > 1e-6);
            prop_assert!((normalize(a).unwrap().norm() - 1.0).abs() <= 1e-12);
        }
    }
}
