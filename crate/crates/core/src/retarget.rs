//! Human arm to robot arm joint-angle mapping.
//!
//! The observed arm is first rescaled to the robot's link lengths, then four
//! joint angles are read off normals of the torso plane, the shoulder and
//! the elbow. Per-frame changes that are too small (sensor jitter) or too
//! large (tracking glitches) are dropped before angles are clamped into the
//! robot's joint limits.
//!
//! Angle names follow a seven-joint research arm: `s0` shoulder yaw, `s1`
//! shoulder pitch, `e0` elbow roll, `e1` elbow flexion.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    cross, normalize, unit_angle, JointId, Side, SkeletonFrame, Timestamp, Vec3,
};

/// Two arm directions whose unit cross product is shorter than this are
/// treated as parallel.
pub const PARALLEL_EPS: f64 = 1e-6;

const MIN_POINT_SEPARATION: f64 = 1e-6;
const MIN_HUMAN_LINK: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetargetError {
    #[error("degenerate arm: {0}")]
    DegenerateArm(String),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("invalid robot model: {0}")]
    InvalidModel(String),
}

/// Torso, both shoulders, elbow and hand for the arm being mirrored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmObservation {
    pub torso: Vec3,
    pub shoulder: Vec3,
    pub opposite_shoulder: Vec3,
    pub elbow: Vec3,
    pub hand: Vec3,
    pub side: Side,
    pub timestamp: Timestamp,
}

impl ArmObservation {
    /// Reads one arm from a skeleton frame, using the wrist if no hand is tracked.
    pub fn from_frame(frame: &SkeletonFrame, side: Side) -> Result<Self, RetargetError> {
        let get = |id: JointId| {
            frame
                .joint(id)
                .ok_or_else(|| RetargetError::InvalidObservation(format!("joint {id} missing")))
        };
        let hand = frame
            .joint(JointId::hand(side))
            .map(Ok)
            .unwrap_or_else(|| get(JointId::wrist(side)))?;
        let obs = Self {
            torso: get(JointId::Torso)?,
            shoulder: get(JointId::shoulder(side))?,
            opposite_shoulder: get(JointId::shoulder(side.opposite()))?,
            elbow: get(JointId::elbow(side))?,
            hand,
            side,
            timestamp: frame.timestamp,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn points(&self) -> [Vec3; 5] {
        [
            self.torso,
            self.shoulder,
            self.opposite_shoulder,
            self.elbow,
            self.hand,
        ]
    }

    pub fn map_points(&self, mut f: impl FnMut(Vec3) -> Vec3) -> Self {
        Self {
            torso: f(self.torso),
            shoulder: f(self.shoulder),
            opposite_shoulder: f(self.opposite_shoulder),
            elbow: f(self.elbow),
            hand: f(self.hand),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), RetargetError> {
        let pts = self.points();
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(RetargetError::InvalidObservation(
                "non-finite coordinates".into(),
            ));
        }
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if pts[i].distance(&pts[j]) <= MIN_POINT_SEPARATION {
                    return Err(RetargetError::InvalidObservation(format!(
                        "points {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reflection across the body's mid-sagittal plane (through the midpoint
    /// of the shoulders, normal to the shoulder line). Left and right swap.
    pub fn mirrored(&self) -> Result<Self, RetargetError> {
        let mid = (self.shoulder + self.opposite_shoulder) / 2.0;
        let n = normalize(self.shoulder - self.opposite_shoulder)
            .map_err(|_| RetargetError::DegenerateConfiguration("shoulders coincide".into()))?;
        let reflect = |p: Vec3| p - n * (2.0 * (p - mid).dot(&n));
        Ok(Self {
            side: self.side.opposite(),
            ..self.map_points(reflect)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct JointLimits {
    pub min: f64,
    pub max: f64,
}

impl JointLimits {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn clamp(&self, a: f64) -> f64 {
        a.clamp(self.min, self.max)
    }

    pub fn contains(&self, a: f64) -> bool {
        (self.min..=self.max).contains(&a)
    }
}

impl From<[f64; 2]> for JointLimits {
    fn from(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl From<JointLimits> for [f64; 2] {
    fn from(l: JointLimits) -> Self {
        [l.min, l.max]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotArmModel {
    pub s0: JointLimits,
    pub s1: JointLimits,
    pub e0: JointLimits,
    pub e1: JointLimits,
    /// Shoulder to elbow (m).
    pub upper_arm: f64,
    /// Elbow to hand (m).
    pub forearm: f64,
}

impl Default for RobotArmModel {
    fn default() -> Self {
        Self {
            s0: JointLimits::new(-1.70, 1.70),
            s1: JointLimits::new(-2.15, 1.05),
            e0: JointLimits::new(-3.05, 3.05),
            e1: JointLimits::new(0.05, 2.62),
            upper_arm: 0.37,
            forearm: 0.37,
        }
    }
}

impl RobotArmModel {
    pub fn validate(&self) -> Result<(), RetargetError> {
        for (name, l) in [
            ("s0", self.s0),
            ("s1", self.s1),
            ("e0", self.e0),
            ("e1", self.e1),
        ] {
            if !(l.min < l.max) {
                return Err(RetargetError::InvalidModel(format!(
                    "{name}: min {} must be below max {}",
                    l.min, l.max
                )));
            }
        }
        if !(self.upper_arm > 0.0 && self.forearm > 0.0) {
            return Err(RetargetError::InvalidModel(
                "link lengths must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn clamp(&self, a: &RobotJointAngles) -> RobotJointAngles {
        RobotJointAngles {
            s0: self.s0.clamp(a.s0),
            s1: self.s1.clamp(a.s1),
            e0: self.e0.clamp(a.e0),
            e1: self.e1.clamp(a.e1),
            ..*a
        }
    }

    pub fn within_limits(&self, a: &RobotJointAngles) -> bool {
        self.s0.contains(a.s0)
            && self.s1.contains(a.s1)
            && self.e0.contains(a.e0)
            && self.e1.contains(a.e1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotJointAngles {
    pub s0: f64,
    pub s1: f64,
    pub e0: f64,
    pub e1: f64,
    pub side: Side,
    pub timestamp: Timestamp,
}

impl RobotJointAngles {
    pub fn as_array(&self) -> [f64; 4] {
        [self.s0, self.s1, self.e0, self.e1]
    }

    pub fn max_abs_delta(&self, other: &RobotJointAngles) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionThresholds {
    /// Changes where every joint moves less than this (rad) are suppressed.
    pub tiny: f64,
    /// Changes where any joint moves more than this (rad) are rejected.
    pub large: f64,
    /// After this many consecutive rejections the stateful retargeter
    /// accepts the new reading as its reference.
    pub max_consecutive_rejections: u32,
}

impl Default for MotionThresholds {
    fn default() -> Self {
        Self {
            tiny: 0.02,
            large: 1.0,
            max_consecutive_rejections: 10,
        }
    }
}

/// Unit normals of the torso plane, shoulder and elbow plus the body's
/// downward direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmNormals {
    pub torso: Vec3,
    pub down: Vec3,
    pub shoulder: Vec3,
    pub elbow: Vec3,
}

/// Moves elbow and hand along their observed directions so the arm has the
/// robot's link lengths.
pub fn scale_to_robot(
    obs: &ArmObservation,
    model: &RobotArmModel,
) -> Result<ArmObservation, RetargetError> {
    let upper = obs.elbow - obs.shoulder;
    let fore = obs.hand - obs.elbow;
    if upper.norm() <= MIN_HUMAN_LINK || fore.norm() <= MIN_HUMAN_LINK {
        return Err(RetargetError::DegenerateArm(format!(
            "upper arm {:.4} m, forearm {:.4} m",
            upper.norm(),
            fore.norm()
        )));
    }
    let elbow = obs.shoulder + upper / upper.norm() * model.upper_arm;
    let hand = elbow + fore / fore.norm() * model.forearm;
    Ok(ArmObservation {
        elbow,
        hand,
        ..*obs
    })
}

fn unit_cross(a: Vec3, b: Vec3) -> Option<Vec3> {
    let a = normalize(a).ok()?;
    let b = normalize(b).ok()?;
    let c = cross(a, b);
    (c.norm() >= PARALLEL_EPS).then(|| c / c.norm())
}

struct PartialNormals {
    torso: Vec3,
    down: Vec3,
    shoulder: Option<Vec3>,
    elbow: Option<Vec3>,
}

fn partial_normals(obs: &ArmObservation) -> Result<PartialNormals, RetargetError> {
    let (t, s, s2, e, h) = (
        obs.torso,
        obs.shoulder,
        obs.opposite_shoulder,
        obs.elbow,
        obs.hand,
    );
    let torso = unit_cross(s2 - t, s - t).ok_or_else(|| {
        RetargetError::DegenerateConfiguration("torso and shoulders are collinear".into())
    })?;
    // The torso normal is perpendicular to the shoulder line by construction.
    let down = unit_cross(torso, s - s2).ok_or_else(|| {
        RetargetError::DegenerateConfiguration("shoulder line is degenerate".into())
    })?;
    Ok(PartialNormals {
        torso,
        down,
        shoulder: unit_cross(down, s - e),
        elbow: unit_cross(e - h, e - s),
    })
}

/// Plane normals used by the angle formulas; fails when any is undefined.
pub fn compute_normals(obs: &ArmObservation) -> Result<ArmNormals, RetargetError> {
    let n = partial_normals(obs)?;
    Ok(ArmNormals {
        torso: n.torso,
        down: n.down,
        shoulder: n.shoulder.ok_or_else(|| {
            RetargetError::DegenerateConfiguration("upper arm is parallel to the body axis".into())
        })?,
        elbow: n.elbow.ok_or_else(|| {
            RetargetError::DegenerateConfiguration("arm is straight; elbow normal undefined".into())
        })?,
    })
}

/// Unclamped joint angles, holding `s0`/`e0` at zero where their normal is undefined.
pub fn compute_joint_angles(obs: &ArmObservation) -> Result<RobotJointAngles, RetargetError> {
    compute_joint_angles_holding(obs, None)
}

/// Unclamped joint angles. When the arm is straight (or the upper arm lies
/// along the body axis) the affected roll angle keeps its value from `held`,
/// or zero without history.
pub fn compute_joint_angles_holding(
    obs: &ArmObservation,
    held: Option<&RobotJointAngles>,
) -> Result<RobotJointAngles, RetargetError> {
    match obs.side {
        Side::Left => left_arm_angles(obs, held.map(|h| (h.s0, h.e0))),
        Side::Right => {
            // Solve the mirror image as a left arm, then flip the roll directions.
            let held = held.map(|h| (-h.s0, -h.e0));
            let a = left_arm_angles(&obs.mirrored()?, held)?;
            Ok(RobotJointAngles {
                s0: -a.s0,
                e0: -a.e0,
                side: Side::Right,
                ..a
            })
        }
    }
}

fn left_arm_angles(
    obs: &ArmObservation,
    held: Option<(f64, f64)>,
) -> Result<RobotJointAngles, RetargetError> {
    let n = partial_normals(obs)?;
    let (held_s0, held_e0) = held.unwrap_or((0.0, 0.0));
    let unit = |v: Vec3| {
        normalize(v).map_err(|_| RetargetError::DegenerateArm("zero-length arm segment".into()))
    };
    let elbow_to_shoulder = unit(obs.shoulder - obs.elbow)?;
    let hand_to_elbow = unit(obs.elbow - obs.hand)?;
    let shoulder_to_elbow = -elbow_to_shoulder;

    let s0 = n.shoulder.map_or(held_s0, |sn| -unit_angle(n.torso, sn));
    let s1 = unit_angle(n.down, elbow_to_shoulder);
    let e0 = n.elbow.map_or(held_e0, |en| -unit_angle(n.torso, en));
    let e1 = PI - unit_angle(hand_to_elbow, shoulder_to_elbow);
    Ok(RobotJointAngles {
        s0,
        s1,
        e0,
        e1,
        side: obs.side,
        timestamp: obs.timestamp,
    })
}

/// Drops jitter and glitches, otherwise clamps into the joint limits.
/// Deltas are measured between the unclamped candidate and `previous`.
pub fn apply_motion_thresholds(
    previous: &RobotJointAngles,
    candidate: &RobotJointAngles,
    model: &RobotArmModel,
    thresholds: &MotionThresholds,
) -> Option<RobotJointAngles> {
    let deltas: Vec<f64> = candidate
        .as_array()
        .iter()
        .zip(previous.as_array())
        .map(|(a, b)| (a - b).abs())
        .collect();
    if deltas.iter().all(|d| *d < thresholds.tiny) {
        return None;
    }
    if deltas.iter().any(|d| *d > thresholds.large) {
        return None;
    }
    Some(model.clamp(candidate))
}

/// Scale, solve and filter in one step. The first frame (no `previous`) is
/// always emitted, clamped into limits.
pub fn retarget(
    obs: &ArmObservation,
    model: &RobotArmModel,
    thresholds: &MotionThresholds,
    previous: Option<&RobotJointAngles>,
) -> Result<Option<RobotJointAngles>, RetargetError> {
    obs.validate()?;
    let scaled = scale_to_robot(obs, model)?;
    let candidate = compute_joint_angles_holding(&scaled, previous)?;
    Ok(match previous {
        None => Some(model.clamp(&candidate)),
        Some(prev) => apply_motion_thresholds(prev, &candidate, model, thresholds),
    })
}

/// Per-arm retargeting with its own memory of the last emitted angles.
#[derive(Debug, Clone)]
pub struct Retargeter {
    model: RobotArmModel,
    thresholds: MotionThresholds,
    previous: Option<RobotJointAngles>,
    rejections: u32,
}

impl Retargeter {
    pub fn new(model: RobotArmModel, thresholds: MotionThresholds) -> Result<Self, RetargetError> {
        model.validate()?;
        Ok(Self {
            model,
            thresholds,
            previous: None,
            rejections: 0,
        })
    }

    pub fn previous(&self) -> Option<&RobotJointAngles> {
        self.previous.as_ref()
    }

    pub fn update(
        &mut self,
        obs: &ArmObservation,
    ) -> Result<Option<RobotJointAngles>, RetargetError> {
        obs.validate()?;
        let scaled = scale_to_robot(obs, &self.model)?;
        let candidate = compute_joint_angles_holding(&scaled, self.previous.as_ref())?;
        let out = match &self.previous {
            None => Some(self.model.clamp(&candidate)),
            Some(prev) => {
                if candidate.max_abs_delta(prev) > self.thresholds.large {
                    self.rejections += 1;
                    if self.rejections > self.thresholds.max_consecutive_rejections {
                        Some(self.model.clamp(&candidate))
                    } else {
                        None
                    }
                } else {
                    self.rejections = 0;
                    apply_motion_thresholds(prev, &candidate, &self.model, &self.thresholds)
                }
            }
        };
        if let Some(a) = out {
            self.rejections = 0;
            self.previous = Some(a);
        }
        Ok(out)
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::geometry::RigidPose;
    use proptest::prelude::*;

    fn bent_arm(bend: f64, raise: f64, twist: f64) -> ArmObservation {
        let s = Vec3::new(0.2, 0.0, 0.0);
        let upper = Vec3::new(raise.sin(), -raise.cos(), 0.0);
        let elbow = s + upper * 0.3;
        // Forearm rotated by `bend` away from the upper-arm direction, about
        // an axis perpendicular to it selected by `twist`.
        let perp_a = Vec3::new(raise.cos(), raise.sin(), 0.0);
        let perp = perp_a * twist.cos() + Vec3::Z * twist.sin();
        let fore = upper * bend.cos() + perp * bend.sin();
        ArmObservation {
            torso: Vec3::new(0.0, -0.3, 0.0),
            shoulder: s,
            opposite_shoulder: Vec3::new(-0.2, 0.0, 0.0),
            elbow,
            hand: elbow + fore * 0.25,
            side: Side::Left,
            timestamp: Timestamp::ZERO,
        }
    }

    proptest! {
        #[test]
        fn rigid_motion_and_scale_invariance(
            bend in 0.1f64..2.5, raise in 0.2f64..2.8, twist in -3.0f64..3.0,
            yaw in -3.0f64..3.0, pitch in -1.4f64..1.4, roll in -3.0f64..3.0,
            tx in -2.0f64..2.0, ty in -2.0f64..2.0, tz in -2.0f64..2.0,
            scale in 0.5f64..2.0,
        ) {
            let o = bent_arm(bend, raise, twist);
            let pose = RigidPose::from_yaw_pitch_roll(yaw, pitch, roll, Vec3::new(tx, ty, tz));
            let moved = o.map_points(|p| pose.transform(p * scale));
            let a = compute_joint_angles(&o).unwrap();
            let b = compute_joint_angles(&moved).unwrap();
            for (x, y) in a.as_array().iter().zip(b.as_array()) {
                prop_assert!((x - y).abs() <= 1e-9, "{a:?} vs {b:?}");
            }
        }

        #[test]
        fn elbow_flexion_tracks_bend(raise in 0.2f64..2.8, twist in -3.0f64..3.0, b1 in 0.0f64..3.0, b2 in 0.0f64..3.0) {
            let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
            prop_assume!(hi - lo > 1e-6);
            let e_lo = compute_joint_angles(&bent_arm(lo, raise, twist)).unwrap().e1;
            let e_hi = compute_joint_angles(&bent_arm(hi, raise, twist)).unwrap().e1;
            prop_assert!((e_lo - lo).abs() < 1e-9);
            prop_assert!(e_hi > e_lo);
        }

        #[test]
        fn emitted_angles_within_limits(
            bend in 0.0f64..3.1, raise in 0.0f64..3.1, twist in -3.1f64..3.1,
            side_right in any::<bool>(),
        ) {
            let mut o = bent_arm(bend, raise, twist);
            if side_right {
                o = o.mirrored().unwrap();
            }
            let model = RobotArmModel::default();
            if let Ok(Some(a)) = retarget(&o, &model, &MotionThresholds::default(), None) {
                prop_assert!(model.within_limits(&a));
            }
        }
    }
}
