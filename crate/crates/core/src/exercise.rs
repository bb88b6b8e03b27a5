//! Online recognition and counting of arm exercise repetitions.
//!
//! The tracked joint is followed inside a body-relative region of interest.
//! An attempt opens when the joint rises past a fraction of the exercise's
//! minimum excursion and closes when it falls back below a lower band (or
//! leaves the region). The closed path is then judged on its length, the
//! sharpest turn between consecutive path segments, and how far it reached.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_between, JointId, Side, SkeletonFrame, Timestamp, Vec3};

/// Segments shorter than this are dropped before turn angles are measured.
pub const MIN_SEGMENT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExerciseError {
    #[error("need at least {needed} distinct points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("joint {0} missing from frame")]
    MissingJoint(JointId),
    #[error("timestamp {current} does not follow previous frame at {previous}")]
    NonMonotonicTimestamp {
        previous: Timestamp,
        current: Timestamp,
    },
    #[error("invalid exercise definition: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExerciseKind {
    ShoulderPress,
    SideLateralRaise,
}

impl ExerciseKind {
    pub const ALL: [ExerciseKind; 2] =
        [ExerciseKind::ShoulderPress, ExerciseKind::SideLateralRaise];

    pub fn as_str(self) -> &'static str {
        match self {
            ExerciseKind::ShoulderPress => "shoulder_press",
            ExerciseKind::SideLateralRaise => "side_lateral_raise",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ExerciseKind::ShoulderPress => "shoulder press",
            ExerciseKind::SideLateralRaise => "side lateral raise",
        }
    }
}

impl fmt::Display for ExerciseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExerciseKind {
    type Err = ExerciseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ExerciseKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| ExerciseError::InvalidSpec(format!("unknown exercise {s:?}")))
    }
}

/// Axis-aligned box placed relative to an anchor joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionOfInterest {
    pub anchor: JointId,
    pub offset: Vec3,
    /// Half-widths of the box along x, y and z.
    pub extents: Vec3,
}

impl RegionOfInterest {
    pub fn new(anchor: JointId, offset: Vec3, extents: Vec3) -> Result<Self, ExerciseError> {
        let roi = Self {
            anchor,
            offset,
            extents,
        };
        roi.validate()?;
        Ok(roi)
    }

    pub fn validate(&self) -> Result<(), ExerciseError> {
        let e = self.extents;
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) || !e.is_finite() || !self.offset.is_finite() {
            return Err(ExerciseError::InvalidSpec(format!(
                "region extents must be positive and finite, got {e:?}"
            )));
        }
        Ok(())
    }

    fn contains_relative(&self, rel: Vec3) -> bool {
        let d = rel - self.offset;
        d.x.abs() <= self.extents.x && d.y.abs() <= self.extents.y && d.z.abs() <= self.extents.z
    }
}

/// Direction along which an exercise's reach is measured, relative to the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcursionAxis {
    /// Height above the anchor.
    Vertical,
    /// Distance away from the body midline on the tracked joint's side.
    Lateral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExerciseSpec {
    pub name: ExerciseKind,
    pub tracked_joint: JointId,
    pub roi: RegionOfInterest,
    pub min_path_length: f64,
    pub max_path_length: f64,
    pub max_segment_angle: f64,
    pub min_excursion: f64,
    pub excursion_axis: ExcursionAxis,
    pub target_reps: u32,
}

impl ExerciseSpec {
    pub fn shoulder_press(side: Side) -> Self {
        Self {
            name: ExerciseKind::ShoulderPress,
            tracked_joint: JointId::wrist(side),
            roi: RegionOfInterest {
                anchor: JointId::shoulder(side),
                offset: Vec3::new(0.0, 0.30, 0.0),
                extents: Vec3::new(0.35, 0.45, 0.25),
            },
            min_path_length: 0.6,
            max_path_length: 2.0,
            max_segment_angle: 2.6,
            min_excursion: 0.30,
            excursion_axis: ExcursionAxis::Vertical,
            target_reps: 5,
        }
    }

    pub fn side_lateral_raise(side: Side) -> Self {
        Self {
            name: ExerciseKind::SideLateralRaise,
            tracked_joint: JointId::wrist(side),
            roi: RegionOfInterest {
                anchor: JointId::shoulder(side),
                offset: Vec3::new(0.0, -0.20, 0.0),
                extents: Vec3::new(0.75, 0.60, 0.20),
            },
            min_path_length: 0.5,
            max_path_length: 1.8,
            max_segment_angle: 2.6,
            min_excursion: 0.30,
            excursion_axis: ExcursionAxis::Lateral,
            target_reps: 5,
        }
    }

    pub fn for_kind(kind: ExerciseKind, side: Side) -> Self {
        match kind {
            ExerciseKind::ShoulderPress => Self::shoulder_press(side),
            ExerciseKind::SideLateralRaise => Self::side_lateral_raise(side),
        }
    }

    pub fn validate(&self) -> Result<(), ExerciseError> {
        self.roi.validate()?;
        if !(self.min_path_length >= 0.0 && self.min_path_length < self.max_path_length) {
            return Err(ExerciseError::InvalidSpec(format!(
                "{}: min path length {} must be below max {}",
                self.name, self.min_path_length, self.max_path_length
            )));
        }
        if !(self.max_segment_angle > 0.0) || !(self.min_excursion > 0.0) {
            return Err(ExerciseError::InvalidSpec(format!(
                "{}: angle limit and minimum excursion must be positive",
                self.name
            )));
        }
        if self.target_reps < 1 {
            return Err(ExerciseError::InvalidSpec(format!(
                "{}: target repetitions must be at least 1",
                self.name
            )));
        }
        Ok(())
    }

    /// Progress coordinate of a body-relative position along the excursion axis.
    fn progress(&self, rel: Vec3) -> f64 {
        match self.excursion_axis {
            ExcursionAxis::Vertical => rel.y,
            ExcursionAxis::Lateral => {
                let sign = self.tracked_joint.side().map_or(1.0, Side::outward_sign);
                rel.x * sign
            }
        }
    }
}

/// Tuning of the attempt segmentation, shared by every exercise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    /// Frames whose tracked joint is less confident than this are skipped.
    pub min_confidence: f64,
    /// Moving-average length (frames) applied to the body-relative joint position.
    pub smoothing_window: usize,
    /// A path sample is kept only once it is this far (m) from the previous kept sample.
    pub min_sample_spacing: f64,
    /// Attempt opens above this fraction of the minimum excursion.
    pub start_fraction: f64,
    /// Attempt closes below this fraction of the minimum excursion.
    pub end_fraction: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            min_confidence: 0.3,
            smoothing_window: 5,
            min_sample_spacing: 0.04,
            start_fraction: 0.2,
            end_fraction: 0.1,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<(), ExerciseError> {
        if self.smoothing_window == 0 {
            return Err(ExerciseError::InvalidSpec(
                "smoothing window must be at least one frame".into(),
            ));
        }
        if !(self.min_sample_spacing >= 0.0) {
            return Err(ExerciseError::InvalidSpec(
                "sample spacing must be non-negative".into(),
            ));
        }
        if !(0.0 <= self.end_fraction && self.end_fraction < self.start_fraction) {
            return Err(ExerciseError::InvalidSpec(
                "end fraction must be non-negative and below the start fraction".into(),
            ));
        }
        Ok(())
    }
}

/// Samples of the tracked joint collected during one attempt.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathBuffer {
    samples: Vec<(Timestamp, Vec3)>,
}

impl PathBuffer {
    pub fn push(&mut self, t: Timestamp, p: Vec3) {
        debug_assert!(self.samples.last().is_none_or(|(last, _)| *last < t));
        self.samples.push((t, p));
    }

    pub fn last_point(&self) -> Option<Vec3> {
        self.samples.last().map(|(_, p)| *p)
    }

    pub fn points(&self) -> Vec<Vec3> {
        self.samples.iter().map(|(_, p)| *p).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    PathTooShort,
    PathTooLong,
    PathNotSmooth,
    InsufficientExcursion,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::PathTooShort => "path_too_short",
            FailureReason::PathTooLong => "path_too_long",
            FailureReason::PathNotSmooth => "path_not_smooth",
            FailureReason::InsufficientExcursion => "insufficient_excursion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepEvent {
    pub exercise: ExerciseKind,
    pub verdict: Verdict,
    pub failure: Option<FailureReason>,
    pub path_length: f64,
    pub max_segment_angle: f64,
    pub excursion: f64,
    /// Correct repetitions counted so far, including this one when correct.
    pub rep_index: u32,
    pub timestamp: Timestamp,
}

impl RepEvent {
    pub fn is_correct(&self) -> bool {
        self.verdict == Verdict::Correct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RepCounts {
    pub correct: u32,
    pub incorrect: u32,
}

/// Total Euclidean length of a polyline.
pub fn path_length(points: &[Vec3]) -> Result<f64, ExerciseError> {
    if points.len() < 2 {
        return Err(ExerciseError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    Ok(points.windows(2).map(|w| w[0].distance(&w[1])).sum())
}

/// Turning angle at every interior vertex of a polyline, after dropping
/// zero-length segments.
pub fn path_angles(points: &[Vec3]) -> Result<Vec<f64>, ExerciseError> {
    let mut distinct: Vec<Vec3> = Vec::with_capacity(points.len());
    for p in points {
        if distinct
            .last()
            .is_none_or(|last| last.distance(p) > MIN_SEGMENT_EPS)
        {
            distinct.push(*p);
        }
    }
    if distinct.len() < 3 {
        return Err(ExerciseError::TooFewPoints {
            needed: 3,
            got: distinct.len(),
        });
    }
    Ok(distinct
        .windows(3)
        .map(|w| {
            angle_between(w[1] - w[0], w[2] - w[1])
                .expect("consecutive distinct points span a non-degenerate segment")
        })
        .collect())
}

/// Whether `joint` lies inside `roi` for this frame.
pub fn roi_contains(
    frame: &SkeletonFrame,
    roi: &RegionOfInterest,
    joint: JointId,
) -> Result<bool, ExerciseError> {
    let anchor = frame
        .joint(roi.anchor)
        .ok_or(ExerciseError::MissingJoint(roi.anchor))?;
    let p = frame
        .joint(joint)
        .ok_or(ExerciseError::MissingJoint(joint))?;
    Ok(roi.contains_relative(p - anchor))
}

#[derive(Debug, Clone)]
struct Attempt {
    path: PathBuffer,
    peak: f64,
}

/// Repetition recognizer for one exercise and one tracked person.
#[derive(Debug, Clone)]
pub struct ExerciseEngine {
    spec: ExerciseSpec,
    params: SegmentationParams,
    last_timestamp: Option<Timestamp>,
    recent: VecDeque<Vec3>,
    attempt: Option<Attempt>,
    counts: RepCounts,
}

impl ExerciseEngine {
    pub fn new(spec: ExerciseSpec, params: SegmentationParams) -> Result<Self, ExerciseError> {
        spec.validate()?;
        params.validate()?;
        Ok(Self {
            recent: VecDeque::with_capacity(params.smoothing_window),
            spec,
            params,
            last_timestamp: None,
            attempt: None,
            counts: RepCounts::default(),
        })
    }

    pub fn spec(&self) -> &ExerciseSpec {
        &self.spec
    }

    pub fn in_attempt(&self) -> bool {
        self.attempt.is_some()
    }

    /// Running tallies of correct repetitions and incorrect attempts.
    pub fn session_counts(&self) -> RepCounts {
        self.counts
    }

    /// Feeds one frame; returns an event when an attempt closes.
    pub fn update(&mut self, frame: &SkeletonFrame) -> Result<Option<RepEvent>, ExerciseError> {
        let t = frame.timestamp;
        if let Some(prev) = self.last_timestamp {
            if t <= prev {
                return Err(ExerciseError::NonMonotonicTimestamp {
                    previous: prev,
                    current: t,
                });
            }
        }
        let tracked = self.spec.tracked_joint;
        let anchor_id = self.spec.roi.anchor;
        let joint = frame
            .joint(tracked)
            .ok_or(ExerciseError::MissingJoint(tracked))?;
        let anchor = frame
            .joint(anchor_id)
            .ok_or(ExerciseError::MissingJoint(anchor_id))?;
        self.last_timestamp = Some(t);

        if frame.confidence_of(tracked) < self.params.min_confidence {
            return Ok(None);
        }

        let rel = joint - anchor;
        if self.recent.len() == self.params.smoothing_window {
            self.recent.pop_front();
        }
        self.recent.push_back(rel);
        let smoothed =
            self.recent.iter().fold(Vec3::ZERO, |acc, p| acc + *p) / self.recent.len() as f64;

        let inside = self.spec.roi.contains_relative(rel);
        let q = self.spec.progress(smoothed);
        let start = self.params.start_fraction * self.spec.min_excursion;
        let end = self.params.end_fraction * self.spec.min_excursion;

        match self.attempt.as_mut() {
            None => {
                if inside && q > start {
                    let mut path = PathBuffer::default();
                    path.push(t, smoothed);
                    self.attempt = Some(Attempt { path, peak: q });
                }
                Ok(None)
            }
            Some(attempt) => {
                if !inside {
                    return Ok(Some(self.close_attempt(t)));
                }
                attempt.peak = attempt.peak.max(q);
                let far_enough = attempt
                    .path
                    .last_point()
                    .is_none_or(|last| last.distance(&smoothed) >= self.params.min_sample_spacing);
                if far_enough {
                    attempt.path.push(t, smoothed);
                }
                if q < end {
                    return Ok(Some(self.close_attempt(t)));
                }
                Ok(None)
            }
        }
    }

    fn close_attempt(&mut self, t: Timestamp) -> RepEvent {
        let attempt = self.attempt.take().expect("an attempt is open");
        let points = attempt.path.points();
        let length = path_length(&points).unwrap_or(0.0);
        let max_angle = path_angles(&points)
            .map(|a| a.into_iter().fold(0.0, f64::max))
            .unwrap_or(0.0);
        let spec = &self.spec;
        let failure = if attempt.peak < spec.min_excursion {
            Some(FailureReason::InsufficientExcursion)
        } else if length < spec.min_path_length {
            Some(FailureReason::PathTooShort)
        } else if length > spec.max_path_length {
            Some(FailureReason::PathTooLong)
        } else if max_angle > spec.max_segment_angle {
            Some(FailureReason::PathNotSmooth)
        } else {
            None
        };
        let verdict = match failure {
            None => {
                self.counts.correct += 1;
                Verdict::Correct
            }
            Some(_) => {
                self.counts.incorrect += 1;
                Verdict::Incorrect
            }
        };
        RepEvent {
            exercise: spec.name,
            verdict,
            failure,
            path_length: length,
            max_segment_angle: max_angle,
            excursion: attempt.peak,
            rep_index: self.counts.correct,
            timestamp: t,
        }
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
    fn path_length_examples() {
        assert_eq!(path_length(&[Vec3::ZERO, Vec3::ZERO]).unwrap(), 0.0);
        assert_eq!(path_length(&[Vec3::ZERO, v(1.0, 2.0, 2.0)]).unwrap(), 3.0);
        let square = [Vec3::ZERO, Vec3::X, v(1.0, 1.0, 0.0), Vec3::Y];
        assert_eq!(path_length(&square).unwrap(), 3.0);
        assert!(matches!(
            path_length(&[Vec3::ZERO]),
            Err(ExerciseError::TooFewPoints { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn planar_paths_reduce_to_xy_formula() {
        let pts = [v(0.0, 0.0, 0.0), v(0.3, 0.4, 0.0), v(0.3, 1.4, 0.0)];
        assert_abs_diff_eq!(path_length(&pts).unwrap(), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn path_angle_examples() {
        let straight = [Vec3::ZERO, Vec3::X, v(2.0, 0.0, 0.0)];
        assert_eq!(path_angles(&straight).unwrap(), vec![0.0]);
        let turn = path_angles(&[Vec3::ZERO, Vec3::X, v(1.0, 1.0, 0.0)]).unwrap();
        assert_eq!(turn.len(), 1);
        assert_abs_diff_eq!(turn[0], FRAC_PI_2, epsilon = 1e-15);
        let dup = [Vec3::ZERO, Vec3::X, Vec3::X, v(2.0, 0.0, 0.0)];
        assert_eq!(path_angles(&dup).unwrap(), vec![0.0]);
        assert!(path_angles(&[Vec3::ZERO, Vec3::X, Vec3::X]).is_err());
    }

    #[test]
    fn reversal_is_pi() {
        let a = path_angles(&[Vec3::ZERO, Vec3::Y, Vec3::ZERO]).unwrap();
        assert_abs_diff_eq!(a[0], PI, epsilon = 1e-15);
    }

    fn frame_with(t: f64, anchor: Vec3, wrist: Vec3) -> SkeletonFrame {
        SkeletonFrame::new(Timestamp::new(t).unwrap())
            .with_joint(JointId::LeftShoulder, anchor)
            .with_joint(JointId::LeftWrist, wrist)
    }

    #[test]
    fn roi_examples() {
        let roi = RegionOfInterest::new(JointId::LeftShoulder, v(0.0, 0.3, 0.0), v(0.2, 0.2, 0.2))
            .unwrap();
        let s = v(0.2, 0.3, 2.0);
        let center = frame_with(0.0, s, s + roi.offset);
        assert!(roi_contains(&center, &roi, JointId::LeftWrist).unwrap());
        let outside = frame_with(0.0, s, s + roi.offset + v(0.21, 0.0, 0.0));
        assert!(!roi_contains(&outside, &roi, JointId::LeftWrist).unwrap());
        let no_anchor = SkeletonFrame::new(Timestamp::ZERO).with_joint(JointId::LeftWrist, s);
        assert_eq!(
            roi_contains(&no_anchor, &roi, JointId::LeftWrist),
            Err(ExerciseError::MissingJoint(JointId::LeftShoulder))
        );
    }

    #[test]
    fn roi_rejects_nonpositive_extents() {
        assert!(RegionOfInterest::new(JointId::Torso, Vec3::ZERO, v(0.1, 0.0, 0.1)).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExerciseSpec::shoulder_press(Side::Left);
        assert!(spec.validate().is_ok());
        spec.min_path_length = 3.0;
        assert!(spec.validate().is_err());
        let mut spec = ExerciseSpec::side_lateral_raise(Side::Right);
        spec.target_reps = 0;
        assert!(spec.validate().is_err());
    }

    /// Press-like loop: up along y with a forward bulge along z.
    fn press_cycle(t0: f64, amplitude: f64, fps: f64, period: f64) -> Vec<(f64, Vec3)> {
        let n = (period * fps).round() as usize;
        (0..=n)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / n as f64;
                let s = (1.0 - phi.cos()) / 2.0;
                (
                    t0 + i as f64 / fps,
                    v(0.0, amplitude * s, -0.15 + 0.05 * phi.sin()),
                )
            })
            .collect()
    }

    fn run(engine: &mut ExerciseEngine, samples: &[(f64, Vec3)]) -> Vec<RepEvent> {
        let shoulder = v(0.2, 0.3, 2.0);
        samples
            .iter()
            .filter_map(|(t, rel)| {
                engine
                    .update(&frame_with(*t, shoulder, shoulder + *rel))
                    .unwrap()
            })
            .collect()
    }

    fn press_engine() -> ExerciseEngine {
        ExerciseEngine::new(
            ExerciseSpec::shoulder_press(Side::Left),
            SegmentationParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn clean_press_counts_once() {
        let mut engine = press_engine();
        let events = run(&mut engine, &press_cycle(0.0, 0.45, 30.0, 2.4));
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].verdict, Verdict::Correct);
        assert_eq!(events[0].rep_index, 1);
        assert_eq!(
            engine.session_counts(),
            RepCounts {
                correct: 1,
                incorrect: 0
            }
        );
    }

    #[test]
    fn shallow_press_is_insufficient() {
        let mut engine = press_engine();
        let events = run(&mut engine, &press_cycle(0.0, 0.10, 30.0, 2.4));
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].verdict, Verdict::Incorrect);
        assert_eq!(
            events[0].failure,
            Some(FailureReason::InsufficientExcursion)
        );
        assert_eq!(events[0].rep_index, 0);
    }

    #[test]
    fn straight_up_and_down_is_not_smooth() {
        let mut engine = press_engine();
        let n = 72;
        let samples: Vec<_> = (0..=n)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / n as f64;
                (
                    i as f64 / 30.0,
                    v(0.0, 0.45 * (1.0 - phi.cos()) / 2.0, -0.15),
                )
            })
            .collect();
        let events = run(&mut engine, &samples);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].failure, Some(FailureReason::PathNotSmooth));
    }

    #[test]
    fn stream_outside_roi_emits_nothing() {
        let mut engine = press_engine();
        let samples: Vec<_> = (0..300)
            .map(|i| (i as f64 / 30.0, v(-0.05, -0.5, -0.3)))
            .collect();
        assert!(run(&mut engine, &samples).is_empty());
        assert_eq!(engine.session_counts(), RepCounts::default());
    }

    #[test]
    fn rejects_non_monotonic_timestamps() {
        let mut engine = press_engine();
        let s = v(0.2, 0.3, 2.0);
        engine.update(&frame_with(1.0, s, s)).unwrap();
        assert!(matches!(
            engine.update(&frame_with(1.0, s, s)),
            Err(ExerciseError::NonMonotonicTimestamp { .. })
        ));
        assert!(engine.update(&frame_with(0.5, s, s)).is_err());
    }

    #[test]
    fn missing_tracked_joint_is_an_error() {
        let mut engine = press_engine();
        let frame =
            SkeletonFrame::new(Timestamp::ZERO).with_joint(JointId::LeftShoulder, Vec3::ZERO);
        assert_eq!(
            engine.update(&frame),
            Err(ExerciseError::MissingJoint(JointId::LeftWrist))
        );
    }

    #[test]
    fn low_confidence_frames_do_not_abort_attempt() {
        let mut engine = press_engine();
        let shoulder = v(0.2, 0.3, 2.0);
        let mut events = Vec::new();
        for (t, rel) in press_cycle(0.0, 0.45, 30.0, 2.4) {
            let mut frame = frame_with(t, shoulder, shoulder + rel);
            // Occlusion near the top: the joint jumps far outside the region.
            if (1.0..1.3).contains(&t) {
                frame.joints.insert(JointId::LeftWrist, v(5.0, 5.0, 5.0));
                frame.confidence.insert(JointId::LeftWrist, 0.1);
            }
            events.extend(engine.update(&frame).unwrap());
        }
        assert_eq!(events.len(), 1);
        assert!(events[0].is_correct());
    }

    #[test]
    fn rep_index_increments_only_on_correct() {
        let mut engine = press_engine();
        let mut samples = Vec::new();
        let mut t0 = 0.0;
        for amp in [0.45, 0.10, 0.45, 0.10, 0.45] {
            samples.extend(press_cycle(t0, amp, 30.0, 2.4));
            t0 += 3.0;
            samples.push((t0 - 0.3, v(0.0, 0.0, -0.15)));
        }
        let events = run(&mut engine, &samples);
        let indices: Vec<u32> = events.iter().map(|e| e.rep_index).collect();
        assert_eq!(indices, vec![1, 1, 2, 2, 3]);
        assert_eq!(
            engine.session_counts(),
            RepCounts {
                correct: 3,
                incorrect: 2
            }
        );
    }

    fn arb_points() -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec(
            (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| v(x, y, z)),
            3..30,
        )
    }

    fn rotate(p: Vec3, yaw: f64, pitch: f64) -> Vec3 {
        let (sy, cy) = yaw.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let q = v(cy * p.x + sy * p.z, p.y, -sy * p.x + cy * p.z);
        v(q.x, cp * q.y - sp * q.z, sp * q.y + cp * q.z)
    }

    proptest! {
        #[test]
        fn length_at_least_chord(pts in arb_points()) {
            let chord = pts[0].distance(pts.last().unwrap());
            prop_assert!(path_length(&pts).unwrap() >= chord - 1e-12);
        }

        #[test]
        fn rigid_and_scale_invariance(
            pts in arb_points(),
            shift in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
            yaw in -PI..PI,
            pitch in -PI..PI,
            scale in 0.1..10.0f64,
        ) {
            let shift = v(shift.0, shift.1, shift.2);
            let moved: Vec<Vec3> = pts.iter().map(|p| rotate(*p, yaw, pitch) + shift).collect();
            let l0 = path_length(&pts).unwrap();
            let l1 = path_length(&moved).unwrap();
            prop_assert!((l0 - l1).abs() <= 1e-9 * l0.max(1.0));

            let a0 = path_angles(&pts).unwrap();
            let a1 = path_angles(&moved).unwrap();
            let scaled: Vec<Vec3> = pts.iter().map(|p| *p * scale).collect();
            let a2 = path_angles(&scaled).unwrap();
            prop_assert_eq!(a0.len(), a1.len());
            prop_assert_eq!(a0.len(), a2.len());
            for ((x, y), z) in a0.iter().zip(&a1).zip(&a2) {
                // acos is ill-conditioned at 0 and π; compare cosines there.
                prop_assert!((x.cos() - y.cos()).abs() <= 1e-9);
                prop_assert!((x.cos() - z.cos()).abs() <= 1e-9);
            }
        }
    }
}
