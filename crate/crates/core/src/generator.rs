//! Seeded synthetic traces with planted ground truth.
//!
//! A seated person faces the skeleton camera 2 m away and performs the
//! scripted exercises with one arm; the other arm rests in the lap. Wrist
//! paths are smooth closed loops through the exercise ROI, the elbow comes
//! from two-bone inverse kinematics. Face landmarks are projected from a
//! scripted head pose into a separate camera one metre in front of the face.
//! All randomness flows from one ChaCha8 stream seeded by `seed`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{Keyword, SpeechEvent};
use crate::exercise::{ExerciseKind, ExerciseSpec, Verdict};
use crate::geometry::{
    normalize, project_point, CameraIntrinsics, JointId, RigidPose, Side, SkeletonFrame, Timestamp,
    Vec3,
};
use crate::head_pose::{AttentionDirection, EyeLandmarks, FaceModel, FacePoints, Pixel};
use crate::trace::{Annotation, LandmarkFrame, TraceRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

const UPPER_ARM: f64 = 0.30;
const FOREARM: f64 = 0.28;
const HAND: f64 = 0.08;
/// Shoulder-to-wrist distance of the hanging arm.
const REACH: f64 = 0.55;
const EYE_WIDTH: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionSegment {
    pub start: f64,
    pub end: f64,
    pub label: AttentionDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedSpeech {
    pub t: f64,
    pub keyword: Keyword,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub exercises: Vec<ExerciseKind>,
    /// Planted repetitions per exercise.
    pub reps: u32,
    /// Excursion of every rep (m) unless overridden per rep.
    pub amplitude: f64,
    /// Per-rep amplitude overrides, indexed by rep within an exercise.
    pub rep_amplitudes: Vec<f64>,
    /// Joint position noise σ (m).
    pub noise_joints: f64,
    /// Landmark noise σ (px).
    pub noise_pixels: f64,
    pub frame_rate: f64,
    pub seed: u64,
    pub side: Side,
    /// Duration of one rep (s).
    pub rep_period: f64,
    /// Pause between reps (s).
    pub rest: f64,
    /// Still time before the first exercise (s).
    pub lead_in: f64,
    /// Time to move between exercise rest poses (s).
    pub transition: f64,
    /// Still time after the last rep (s).
    pub tail: f64,
    pub landmarks: bool,
    pub camera: CameraIntrinsics,
    /// Nose position in the landmark camera's frame.
    pub head_position: Vec3,
    /// Unscripted time is frontal with open eyes.
    pub attention_script: Vec<AttentionSegment>,
    pub speech_script: Vec<ScriptedSpeech>,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            exercises: vec![ExerciseKind::ShoulderPress],
            reps: 5,
            amplitude: 0.45,
            rep_amplitudes: Vec::new(),
            noise_joints: 0.0,
            noise_pixels: 0.0,
            frame_rate: 30.0,
            seed: 0,
            side: Side::Left,
            rep_period: 2.4,
            rest: 1.0,
            lead_in: 2.0,
            transition: 3.0,
            tail: 2.0,
            landmarks: true,
            camera: CameraIntrinsics::default(),
            head_position: Vec3::new(0.0, 0.05, 1.0),
            attention_script: Vec::new(),
            speech_script: Vec::new(),
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::InvalidParams(m.to_string()));
        if self.exercises.is_empty() {
            return bad("at least one exercise is required");
        }
        if self.reps == 0 {
            return bad("reps must be at least 1");
        }
        self.validate_common()
    }

    fn validate_common(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::InvalidParams(m));
        if !(self.noise_joints >= 0.0 && self.noise_joints.is_finite()) {
            return bad(format!("joint noise {} must be ≥ 0", self.noise_joints));
        }
        if !(self.noise_pixels >= 0.0 && self.noise_pixels.is_finite()) {
            return bad(format!("pixel noise {} must be ≥ 0", self.noise_pixels));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad(format!("frame rate {} must be positive", self.frame_rate));
        }
        if !(self.amplitude > 0.0) || self.rep_amplitudes.iter().any(|a| !(*a > 0.0)) {
            return bad("amplitudes must be positive".into());
        }
        if !(self.rep_period > 0.0) {
            return bad("rep period must be positive".into());
        }
        for (name, v) in [
            ("rest", self.rest),
            ("lead_in", self.lead_in),
            ("transition", self.transition),
            ("tail", self.tail),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be ≥ 0"));
            }
        }
        self.camera
            .validate()
            .map_err(|e| GeneratorError::InvalidParams(e.to_string()))?;
        if !(self.head_position.z > 0.3) {
            return bad("head must be at least 0.3 m in front of the camera".into());
        }
        for s in &self.attention_script {
            if !(s.start >= 0.0 && s.end > s.start) {
                return bad(format!(
                    "attention segment [{}, {}) is empty",
                    s.start, s.end
                ));
            }
        }
        if self
            .speech_script
            .iter()
            .any(|s| !(s.t >= 0.0 && s.t.is_finite()))
        {
            return bad("speech times must be ≥ 0".into());
        }
        Ok(())
    }

    fn amplitude_of(&self, rep: usize) -> f64 {
        self.rep_amplitudes
            .get(rep)
            .copied()
            .unwrap_or(self.amplitude)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedExercise {
    pub exercise: ExerciseKind,
    pub planted: u32,
    /// Planted reps whose excursion meets the default exercise spec.
    pub expected_correct: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub duration: f64,
    pub frames: usize,
    pub exercises: Vec<PlantedExercise>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrace {
    pub records: Vec<TraceRecord>,
    pub summary: TraceSummary,
}

/// Wrist offset from the shoulder on the person's left side (x outward) at
/// cycle phase `phi` in `[0, 2π]`.
pub fn wrist_offset(kind: ExerciseKind, amplitude: f64, phi: f64) -> Vec3 {
    let s = (1.0 - phi.cos()) / 2.0;
    match kind {
        ExerciseKind::ShoulderPress => Vec3::new(0.0, amplitude * s, -0.15 + 0.05 * phi.sin()),
        ExerciseKind::SideLateralRaise => {
            let top = (amplitude / REACH).min(0.99).asin();
            let theta = top * s;
            Vec3::new(REACH * theta.sin(), -REACH * theta.cos(), 0.05 * phi.sin())
        }
    }
}

fn lap_offset() -> Vec3 {
    Vec3::new(-0.08, -0.45, -0.25)
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Elbow position for shoulder `s` and wrist `w`, bending toward `pole`.
fn elbow_ik(s: Vec3, w: Vec3, pole: Vec3) -> Vec3 {
    let rel = w - s;
    let d = rel.norm().clamp(
        (UPPER_ARM - FOREARM).abs() + 1e-6,
        UPPER_ARM + FOREARM - 1e-6,
    );
    let u = normalize(rel).unwrap_or(Vec3::new(0.0, -1.0, 0.0));
    let a = (UPPER_ARM * UPPER_ARM - FOREARM * FOREARM + d * d) / (2.0 * d);
    let h = (UPPER_ARM * UPPER_ARM - a * a).max(0.0).sqrt();
    let v = normalize(pole - u * pole.dot(&u))
        .or_else(|_| normalize(Vec3::Z - u * u.z))
        .unwrap_or(Vec3::X);
    s + u * a + v * h
}

struct Body {
    side: Side,
}

impl Body {
    const ORIGIN: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 2.0,
    };

    fn shoulder(&self, side: Side) -> Vec3 {
        Self::ORIGIN + Vec3::new(0.2 * side.outward_sign(), 0.3, 0.0)
    }

    fn mirror(side: Side, offset: Vec3) -> Vec3 {
        Vec3::new(offset.x * side.outward_sign(), offset.y, offset.z)
    }

    /// Noise-free joints for the active arm's wrist offset (left-side convention).
    fn frame(&self, t: Timestamp, active_offset: Vec3) -> SkeletonFrame {
        let o = Self::ORIGIN;
        let mut f = SkeletonFrame::new(t)
            .with_joint(JointId::Head, o + Vec3::new(0.0, 0.55, 0.0))
            .with_joint(JointId::Neck, o + Vec3::new(0.0, 0.35, 0.0))
            .with_joint(JointId::Torso, o + Vec3::new(0.0, 0.0, 0.0))
            .with_joint(JointId::LeftHip, o + Vec3::new(0.15, -0.25, 0.0))
            .with_joint(JointId::RightHip, o + Vec3::new(-0.15, -0.25, 0.0));
        for side in [Side::Left, Side::Right] {
            let offset = if side == self.side {
                active_offset
            } else {
                lap_offset()
            };
            let s = self.shoulder(side);
            let w = s + Self::mirror(side, offset);
            let pole = Vec3::new(side.outward_sign(), -1.0, 0.2);
            let e = elbow_ik(s, w, pole);
            let hand = w + normalize(w - e).unwrap_or(Vec3::new(0.0, -1.0, 0.0)) * HAND;
            f = f
                .with_joint(JointId::shoulder(side), s)
                .with_joint(JointId::elbow(side), e)
                .with_joint(JointId::wrist(side), w)
                .with_joint(JointId::hand(side), hand);
        }
        f
    }
}

#[derive(Debug, Clone, Copy)]
struct HeadSegment {
    start: f64,
    end: f64,
    label: AttentionDirection,
    pose: RigidPose,
    ear: f64,
}

fn draw_head_segment(rng: &mut ChaCha8Rng, seg: &AttentionSegment, head: Vec3) -> HeadSegment {
    let deg = |d: f64| d.to_radians();
    let (yaw, pitch) = match seg.label {
        AttentionDirection::FacingAway => {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (
                sign * deg(rng.random_range(45.0..60.0)),
                deg(rng.random_range(-10.0..10.0)),
            )
        }
        _ => (
            deg(rng.random_range(-20.0..20.0)),
            deg(rng.random_range(-12.0..12.0)),
        ),
    };
    let roll = deg(rng.random_range(-10.0..10.0));
    let jitter = Vec3::new(
        rng.random_range(-0.05..0.05),
        rng.random_range(-0.05..0.05),
        rng.random_range(-0.1..0.1),
    );
    let ear = match seg.label {
        AttentionDirection::FacingRobotEyesClosed => rng.random_range(0.05..0.10),
        _ => rng.random_range(0.28..0.34),
    };
    HeadSegment {
        start: seg.start,
        end: seg.end,
        label: seg.label,
        pose: RigidPose::from_yaw_pitch_roll(yaw, pitch, roll, head + jitter),
        ear,
    }
}

fn frontal_segment(start: f64, end: f64, head: Vec3) -> HeadSegment {
    HeadSegment {
        start,
        end,
        label: AttentionDirection::FacingRobotEyesOpen,
        pose: RigidPose::from_translation(head),
        ear: 0.3,
    }
}

/// Scripted segments with random poses, gaps filled with frontal ones.
fn head_schedule(
    rng: &mut ChaCha8Rng,
    params: &GeneratorParams,
    duration: f64,
) -> Vec<HeadSegment> {
    let mut script = params.attention_script.clone();
    script.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut out = Vec::new();
    let mut cursor = 0.0;
    for seg in &script {
        let start = seg.start.max(cursor);
        if start >= seg.end {
            continue;
        }
        if start > cursor {
            out.push(frontal_segment(cursor, start, params.head_position));
        }
        let mut drawn = draw_head_segment(rng, seg, params.head_position);
        drawn.start = start;
        out.push(drawn);
        cursor = seg.end;
    }
    if cursor <= duration {
        out.push(frontal_segment(cursor, f64::INFINITY, params.head_position));
    }
    out
}

/// Six eye-contour points for an eye whose outer corner is `corner`.
fn eye_model(corner: Vec3, ear: f64) -> [Vec3; 6] {
    let inward = if corner.x < 0.0 { 1.0 } else { -1.0 };
    let h = ear * EYE_WIDTH / 2.0;
    let at = |frac: f64, dy: f64| corner + Vec3::new(inward * frac * EYE_WIDTH, dy, 0.0);
    [
        at(0.0, 0.0),
        at(1.0 / 3.0, h),
        at(2.0 / 3.0, h),
        at(1.0, 0.0),
        at(2.0 / 3.0, -h),
        at(1.0 / 3.0, -h),
    ]
}

struct Noise {
    joints: Normal<f64>,
    pixels: Normal<f64>,
}

impl Noise {
    fn new(params: &GeneratorParams) -> Self {
        Self {
            joints: Normal::new(0.0, params.noise_joints).expect("σ validated"),
            pixels: Normal::new(0.0, params.noise_pixels).expect("σ validated"),
        }
    }

    fn vec3(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(
            self.joints.sample(rng),
            self.joints.sample(rng),
            self.joints.sample(rng),
        )
    }

    fn pixel(&self, rng: &mut ChaCha8Rng, p: (f64, f64)) -> Pixel {
        Pixel::new(p.0 + self.pixels.sample(rng), p.1 + self.pixels.sample(rng))
    }
}

fn landmark_frame(
    rng: &mut ChaCha8Rng,
    noise: &Noise,
    t: Timestamp,
    seg: &HeadSegment,
    model: &FaceModel,
    k: &CameraIntrinsics,
) -> LandmarkFrame {
    let project = |p: Vec3| project_point(p, &seg.pose, k).expect("head is in front of the camera");
    let face = model.to_array().map(project);
    let left = eye_model(model.left_eye_corner, seg.ear).map(project);
    let right = eye_model(model.right_eye_corner, seg.ear).map(project);
    let points = FacePoints::from_array(face.map(|p| noise.pixel(rng, p)));
    let left_eye = EyeLandmarks {
        points: left.map(|p| noise.pixel(rng, p)),
    };
    let right_eye = EyeLandmarks {
        points: right.map(|p| noise.pixel(rng, p)),
    };
    LandmarkFrame {
        timestamp: t,
        points,
        left_eye,
        right_eye,
    }
}

/// Active-arm wrist offset over time and the rep annotations that go with it.
struct Choreography {
    keyframes: Vec<Block>,
    duration: f64,
}

enum Block {
    Still {
        start: f64,
        offset: Vec3,
    },
    Move {
        start: f64,
        end: f64,
        from: Vec3,
        to: Vec3,
    },
    Rep {
        start: f64,
        end: f64,
        kind: ExerciseKind,
        amplitude: f64,
    },
}

impl Block {
    fn start(&self) -> f64 {
        match self {
            Block::Still { start, .. } | Block::Move { start, .. } | Block::Rep { start, .. } => {
                *start
            }
        }
    }
}

impl Choreography {
    fn offset_at(&self, t: f64) -> Vec3 {
        let idx = self
            .keyframes
            .partition_point(|b| b.start() <= t)
            .saturating_sub(1);
        match &self.keyframes[idx] {
            Block::Still { offset, .. } => *offset,
            Block::Move {
                start,
                end,
                from,
                to,
            } => {
                let s = smoothstep((t - start) / (end - start));
                *from + (*to - *from) * s
            }
            Block::Rep {
                start,
                end,
                kind,
                amplitude,
            } => {
                let phi = 2.0 * PI * ((t - start) / (end - start)).clamp(0.0, 1.0);
                wrist_offset(*kind, *amplitude, phi)
            }
        }
    }
}

fn choreograph(
    params: &GeneratorParams,
) -> (Choreography, Vec<(f64, Annotation)>, Vec<PlantedExercise>) {
    let rest_of = |k: ExerciseKind| wrist_offset(k, params.amplitude, 0.0);
    let mut blocks = vec![Block::Still {
        start: 0.0,
        offset: rest_of(params.exercises[0]),
    }];
    let mut notes = Vec::new();
    let mut planted = Vec::new();
    let mut t = params.lead_in;
    for (ei, &kind) in params.exercises.iter().enumerate() {
        if ei > 0 {
            let from = rest_of(params.exercises[ei - 1]);
            blocks.push(Block::Move {
                start: t,
                end: t + params.transition,
                from,
                to: rest_of(kind),
            });
            t += params.transition;
        }
        notes.push((t, Annotation::ExerciseBegin { exercise: kind }));
        let min_excursion = ExerciseSpec::for_kind(kind, params.side).min_excursion;
        let mut expected_correct = 0;
        for r in 0..params.reps as usize {
            if r > 0 {
                blocks.push(Block::Still {
                    start: t,
                    offset: rest_of(kind),
                });
                t += params.rest;
            }
            let amplitude = params.amplitude_of(r);
            let expected = if amplitude >= min_excursion {
                expected_correct += 1;
                Verdict::Correct
            } else {
                Verdict::Incorrect
            };
            let index = r as u32 + 1;
            notes.push((
                t,
                Annotation::RepStart {
                    exercise: kind,
                    index,
                    amplitude,
                    expected,
                },
            ));
            blocks.push(Block::Rep {
                start: t,
                end: t + params.rep_period,
                kind,
                amplitude,
            });
            t += params.rep_period;
            notes.push((
                t,
                Annotation::RepEnd {
                    exercise: kind,
                    index,
                },
            ));
        }
        blocks.push(Block::Still {
            start: t,
            offset: rest_of(kind),
        });
        planted.push(PlantedExercise {
            exercise: kind,
            planted: params.reps,
            expected_correct,
        });
    }
    (
        Choreography {
            keyframes: blocks,
            duration: t + params.tail,
        },
        notes,
        planted,
    )
}

fn assemble(
    params: &GeneratorParams,
    choreography: &Choreography,
    mut notes: Vec<(f64, Annotation)>,
    planted: Vec<PlantedExercise>,
) -> GeneratedTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let duration = choreography.duration;
    let heads = head_schedule(&mut rng, params, duration);
    let noise = Noise::new(params);
    let model = FaceModel::default();
    let body = Body { side: params.side };

    let frames = (duration * params.frame_rate).floor() as usize + 1;
    // (time, insertion order, record); sorted stably by time at the end.
    let mut timeline: Vec<(f64, TraceRecord)> = Vec::with_capacity(frames * 4);
    let mut head_idx = 0usize;
    let mut announced_head = usize::MAX;
    for i in 0..frames {
        let secs = i as f64 / params.frame_rate;
        let t = Timestamp::new(secs).expect("frame times are non-negative");
        let clean = body.frame(t, choreography.offset_at(secs));
        let mut frame = clean.clone();
        for id in JointId::ALL {
            if let Some(p) = clean.joint(id) {
                frame.joints.insert(id, p + noise.vec3(&mut rng));
            }
        }
        timeline.push((secs, TraceRecord::Skeleton(frame)));

        if params.landmarks {
            while head_idx + 1 < heads.len() && heads[head_idx].end <= secs {
                head_idx += 1;
            }
            let seg = &heads[head_idx];
            timeline.push((
                secs,
                TraceRecord::Landmarks(landmark_frame(
                    &mut rng,
                    &noise,
                    t,
                    seg,
                    &model,
                    &params.camera,
                )),
            ));
            if announced_head != head_idx {
                announced_head = head_idx;
                notes.push((secs, Annotation::PlantedPose { pose: seg.pose }));
                notes.push((secs, Annotation::AttentionLabel { label: seg.label }));
            }
        }
    }
    for (secs, annotation) in notes {
        timeline.push((
            secs,
            TraceRecord::Annotation {
                timestamp: Timestamp::new(secs).expect("annotation times are non-negative"),
                annotation,
            },
        ));
    }
    for s in &params.speech_script {
        timeline.push((
            s.t,
            TraceRecord::Speech(SpeechEvent {
                timestamp: Timestamp::new(s.t).expect("speech times validated"),
                keyword: s.keyword,
            }),
        ));
    }
    timeline.sort_by(|a, b| a.0.total_cmp(&b.0));

    GeneratedTrace {
        records: timeline.into_iter().map(|(_, r)| r).collect(),
        summary: TraceSummary {
            duration,
            frames,
            exercises: planted,
        },
    }
}

/// Trace of the scripted exercises with rep boundaries annotated.
pub fn generate_trace(params: &GeneratorParams) -> Result<GeneratedTrace, GeneratorError> {
    params.validate()?;
    let (choreography, notes, planted) = choreograph(params);
    Ok(assemble(params, &choreography, notes, planted))
}

/// Trace of `duration` seconds with both hands resting in the lap and small
/// slow fidgeting of the active hand.
pub fn generate_idle_trace(
    params: &GeneratorParams,
    duration: f64,
) -> Result<GeneratedTrace, GeneratorError> {
    params.validate_common()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(GeneratorError::InvalidParams(format!(
            "duration {duration} must be positive"
        )));
    }
    // Piecewise fidget: the hand drifts a few centimetres every few seconds.
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x1d1e);
    let mut blocks = vec![Block::Still {
        start: 0.0,
        offset: lap_offset(),
    }];
    let mut t = 0.0;
    let mut at = lap_offset();
    while t < duration {
        let hold = rng.random_range(1.0..4.0);
        let step = rng.random_range(0.5..1.5);
        let to = lap_offset()
            + Vec3::new(
                rng.random_range(-0.03..0.03),
                rng.random_range(-0.03..0.03),
                rng.random_range(-0.03..0.03),
            );
        blocks.push(Block::Move {
            start: t + hold,
            end: t + hold + step,
            from: at,
            to,
        });
        blocks.push(Block::Still {
            start: t + hold + step,
            offset: to,
        });
        at = to;
        t += hold + step;
    }
    let choreography = Choreography {
        keyframes: blocks,
        duration,
    };
    Ok(assemble(params, &choreography, Vec::new(), Vec::new()))
}

/// Alternating one-frame head poses: `n_facing` facing the robot with open
/// eyes and `n_averted` facing away, interleaved.
pub fn attention_script(
    n_facing: usize,
    n_averted: usize,
    frame_rate: f64,
) -> Vec<AttentionSegment> {
    let dt = 1.0 / frame_rate;
    let mut labels = Vec::with_capacity(n_facing + n_averted);
    let (mut f, mut a) = (0, 0);
    while f < n_facing || a < n_averted {
        if f < n_facing {
            labels.push(AttentionDirection::FacingRobotEyesOpen);
            f += 1;
        }
        if a < n_averted {
            labels.push(AttentionDirection::FacingAway);
            a += 1;
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| AttentionSegment {
            // Centred on frame i so float round-off cannot shift boundaries.
            start: (i as f64 - 0.5).max(0.0) * dt,
            end: (i as f64 + 0.5) * dt,
            label,
        })
        .collect()
}
