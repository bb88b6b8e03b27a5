//! Full perception and control loop over a trace, plus evaluation against
//! the trace's planted ground truth.
//!
//! Records sharing a timestamp form one frame. Each frame runs head pose,
//! exercise recognition, activity and attention monitoring, retargeting and
//! finally the session controller. Annotations are read only for scoring and
//! never reach the control path.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{
    ActivityDetector, AttentionLabel, AttentionMonitor, InterruptionEvent, InterruptionKind,
};
use crate::config::CoachConfig;
use crate::exercise::{ExerciseEngine, ExerciseError, ExerciseKind, RepEvent, Verdict};
use crate::geometry::{RigidPose, SkeletonFrame, Timestamp};
use crate::head_pose::{
    classify_attention_direction, estimate_head_pose, eye_aspect_ratio, AttentionDirection,
};
use crate::retarget::{ArmObservation, Retargeter};
use crate::session::{FeedbackPolicy, JournalEntry, Phase, SessionController, SessionInput};
use crate::trace::{Annotation, LandmarkFrame, TraceRecord};

/// Grace period after a planted rep ends in which its detection may arrive.
pub const REP_MATCH_SLACK: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("trace carries no ground-truth annotations")]
    MissingAnnotations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedRep {
    pub exercise: ExerciseKind,
    pub index: u32,
    pub start: f64,
    pub end: Option<f64>,
    pub expected: Verdict,
}

/// One processed landmark frame with whatever ground truth was in force.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadFrame {
    pub timestamp: Timestamp,
    pub estimate: Option<RigidPose>,
    pub predicted: AttentionDirection,
    pub planted_pose: Option<RigidPose>,
    pub planted_label: Option<AttentionDirection>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub journal: Vec<JournalEntry>,
    pub rep_events: Vec<RepEvent>,
    pub head_frames: Vec<HeadFrame>,
    pub planted_reps: Vec<PlantedRep>,
    pub annotations: usize,
    /// Per-frame processing time (ms) of the perception and control path.
    pub latencies_ms: Vec<f64>,
    pub frames: usize,
    pub skipped_frames: usize,
    /// Joint-angle updates handed to the controller during `exercise_active`.
    pub angles_while_active: usize,
    pub final_phase: Option<Phase>,
    pub policy: Option<FeedbackPolicy>,
    /// Processing stopped at an emergency stop.
    pub halted: bool,
}

pub struct Pipeline {
    config: CoachConfig,
    session: SessionController,
    engine: ExerciseEngine,
    engine_exercise: ExerciseKind,
    monitor: AttentionMonitor,
    activity: ActivityDetector,
    retargeter: Retargeter,
    last_skeleton: Option<Timestamp>,
    output: RunOutput,
    planted_pose: Option<RigidPose>,
    planted_label: Option<AttentionDirection>,
}

fn config_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Config(e.to_string())
}

impl Pipeline {
    pub fn new(config: CoachConfig) -> Result<Self, PipelineError> {
        config.validate().map_err(config_err)?;
        let session = SessionController::new(config.session.clone()).map_err(config_err)?;
        let engine_exercise = session.current_exercise();
        let engine = Self::make_engine(&config, engine_exercise)?;
        let retargeter = Retargeter::new(
            config.retarget.model.clone(),
            config.retarget.thresholds.clone(),
        )
        .map_err(config_err)?;
        Ok(Self {
            monitor: AttentionMonitor::new(config.attention.clone()),
            activity: ActivityDetector::new(&config.attention),
            session,
            engine,
            engine_exercise,
            retargeter,
            last_skeleton: None,
            output: RunOutput {
                policy: Some(config.session.policy),
                ..RunOutput::default()
            },
            planted_pose: None,
            planted_label: None,
            config,
        })
    }

    fn make_engine(
        config: &CoachConfig,
        kind: ExerciseKind,
    ) -> Result<ExerciseEngine, PipelineError> {
        let mut spec = config.exercise.spec_for(kind).clone();
        spec.target_reps = config.session.reps_per_exercise;
        ExerciseEngine::new(spec, config.exercise.segmentation.clone()).map_err(config_err)
    }

    pub fn session(&self) -> &SessionController {
        &self.session
    }

    pub fn is_halted(&self) -> bool {
        self.output.halted
    }

    fn step(&mut self, input: SessionInput) {
        // Inputs are generated from one timestamp-ordered frame, so order holds.
        if let Err(e) = self.session.step(input) {
            log::warn!("session rejected input: {e}");
        }
    }

    fn record_ground_truth(&mut self, t: Timestamp, a: &Annotation) {
        self.output.annotations += 1;
        match a {
            Annotation::RepStart {
                exercise,
                index,
                expected,
                ..
            } => self.output.planted_reps.push(PlantedRep {
                exercise: *exercise,
                index: *index,
                start: t.seconds(),
                end: None,
                expected: *expected,
            }),
            Annotation::RepEnd { exercise, index } => {
                if let Some(r) = self
                    .output
                    .planted_reps
                    .iter_mut()
                    .rev()
                    .find(|r| r.exercise == *exercise && r.index == *index)
                {
                    r.end = Some(t.seconds());
                }
            }
            Annotation::PlantedPose { pose } => self.planted_pose = Some(*pose),
            Annotation::AttentionLabel { label } => self.planted_label = Some(*label),
            Annotation::ExerciseBegin { .. } => {}
        }
    }

    fn perceive_face(&mut self, l: &LandmarkFrame) -> AttentionDirection {
        let hp = &self.config.head_pose;
        let estimate = estimate_head_pose(&l.face(), &hp.face_model, &hp.camera, &hp.lm);
        let ears =
            eye_aspect_ratio(&l.left_eye).and_then(|a| Ok((a, eye_aspect_ratio(&l.right_eye)?)));
        let (pose, direction) = match (&estimate, ears) {
            (Ok(est), Ok((el, er))) => (
                Some(est.pose),
                classify_attention_direction(est, el, er, &hp.thresholds),
            ),
            (Ok(est), Err(_)) => (Some(est.pose), AttentionDirection::FacingAway),
            (Err(e), _) => {
                log::debug!("head pose failed at t={}: {e}", l.timestamp);
                (None, AttentionDirection::FacingAway)
            }
        };
        self.output.head_frames.push(HeadFrame {
            timestamp: l.timestamp,
            estimate: pose,
            predicted: direction,
            planted_pose: self.planted_pose,
            planted_label: self.planted_label,
        });
        direction
    }

    fn perceive_body(
        &mut self,
        f: &SkeletonFrame,
    ) -> (Option<RepEvent>, bool, Option<ArmObservation>) {
        if self.last_skeleton.is_some_and(|prev| f.timestamp <= prev) {
            log::warn!("skipping duplicate skeleton at t={}", f.timestamp);
            self.output.skipped_frames += 1;
            return (None, false, None);
        }
        self.last_skeleton = Some(f.timestamp);
        let rep = match self.engine.update(f) {
            Ok(r) => r,
            Err(e @ ExerciseError::MissingJoint(_)) => {
                log::warn!("skipping skeleton at t={}: {e}", f.timestamp);
                self.output.skipped_frames += 1;
                None
            }
            Err(e) => {
                log::warn!("exercise engine error at t={}: {e}", f.timestamp);
                None
            }
        };
        let tracked = self.engine.spec().tracked_joint;
        let moving = f
            .joint(tracked)
            .is_some_and(|p| self.activity.update(f.timestamp, p));
        let side = tracked
            .side()
            .expect("config validation requires a sided joint");
        let arm = ArmObservation::from_frame(f, side).ok();
        (rep, moving, arm)
    }

    /// Processes all records of one timestamp.
    pub fn process_frame(&mut self, batch: &[TraceRecord]) {
        if self.output.halted || batch.is_empty() {
            return;
        }
        let t = batch[0].timestamp();
        for r in batch {
            if let TraceRecord::Annotation {
                timestamp,
                annotation,
            } = r
            {
                self.record_ground_truth(*timestamp, annotation);
            }
        }
        let sensor_frame = batch
            .iter()
            .any(|r| matches!(r, TraceRecord::Skeleton(_) | TraceRecord::Landmarks(_)));
        let started = Instant::now();

        let mut direction = None;
        let mut saw_face = false;
        let mut rep = None;
        let mut moving = false;
        let mut arm = None;
        let mut interruptions: Vec<InterruptionEvent> = Vec::new();
        for r in batch {
            match r {
                TraceRecord::Landmarks(l) => {
                    saw_face = true;
                    direction = Some(self.perceive_face(l));
                }
                TraceRecord::Skeleton(f) => {
                    let (r, m, a) = self.perceive_body(f);
                    rep = rep.or(r);
                    moving |= m;
                    arm = arm.or(a);
                }
                TraceRecord::Speech(s) => match self.monitor.ingest_speech(s) {
                    Ok(Some(ev)) => interruptions.push(ev),
                    Ok(None) => self.step(SessionInput::Speech(*s)),
                    Err(e) => log::warn!("speech rejected: {e}"),
                },
                TraceRecord::Annotation { .. } => {}
            }
        }
        if saw_face {
            let before = self.monitor.state().label;
            match self.monitor.ingest_frame(t, direction, moving) {
                Ok(Some(ev)) => interruptions.push(ev),
                Ok(None) => {
                    if before == AttentionLabel::Interrupted
                        && self.monitor.state().label == AttentionLabel::Attentive
                    {
                        self.step(SessionInput::Attentive(t));
                    }
                }
                Err(e) => log::warn!("attention monitor rejected frame: {e}"),
            }
        }
        let angles = match arm {
            Some(obs) => match self.retargeter.update(&obs) {
                Ok(a) => a,
                Err(e) => {
                    log::debug!("retargeting skipped at t={t}: {e}");
                    None
                }
            },
            None => None,
        };

        if sensor_frame {
            self.step(SessionInput::Tick(t));
        }
        // Emergencies first so nothing else is acted on in the same frame.
        interruptions.sort_by_key(|i| i.kind != InterruptionKind::Emergency);
        for ev in interruptions {
            self.step(SessionInput::Interruption(ev));
        }
        if let Some(ev) = rep {
            self.output.rep_events.push(ev.clone());
            self.step(SessionInput::Rep(ev));
        }
        if let Some(a) = angles {
            if self.session.phase() == Phase::ExerciseActive {
                self.output.angles_while_active += 1;
            }
            self.step(SessionInput::Angles(a));
        }
        if self.session.current_exercise() != self.engine_exercise {
            self.engine_exercise = self.session.current_exercise();
            self.engine = Self::make_engine(&self.config, self.engine_exercise)
                .expect("engine config was validated at construction");
        }
        if sensor_frame {
            self.output.frames += 1;
            self.output
                .latencies_ms
                .push(started.elapsed().as_secs_f64() * 1e3);
        }
        if self.session.phase() == Phase::EmergencyStop {
            self.output.halted = true;
        }
    }

    pub fn finish(mut self) -> RunOutput {
        self.output.journal = self.session.journal().to_vec();
        self.output.final_phase = Some(self.session.phase());
        self.output
    }
}

/// Runs the whole trace, frame by frame.
pub fn run_pipeline(
    records: &[TraceRecord],
    config: &CoachConfig,
) -> Result<RunOutput, PipelineError> {
    let mut p = Pipeline::new(config.clone())?;
    for batch in records.chunk_by(|a, b| a.timestamp() == b.timestamp()) {
        p.process_frame(batch);
        if p.is_halted() {
            break;
        }
    }
    Ok(p.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseReport {
    pub exercise: ExerciseKind,
    pub planted: u32,
    pub planted_correct: u32,
    pub detected_correct: u32,
    pub detected_incorrect: u32,
    /// Planted correct reps detected as correct.
    pub matched_correct: u32,
    /// Rep events not matched to any planted rep.
    pub false_positives: u32,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCell {
    pub planted: AttentionDirection,
    pub predicted: AttentionDirection,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub frames: u32,
    pub correct: u32,
    pub accuracy: f64,
    pub confusion: Vec<ConfusionCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseReport {
    pub frames: u32,
    pub failures: u32,
    pub mean_error_deg: f64,
    pub median_error_deg: f64,
    pub max_error_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub frames: usize,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub policy: FeedbackPolicy,
    pub frames_processed: usize,
    pub skipped_frames: usize,
    pub exercises: Vec<ExerciseReport>,
    pub attention: Option<AttentionReport>,
    pub head_pose: Option<PoseReport>,
    pub latency: LatencyReport,
    pub commands: usize,
    pub feedback_commands: usize,
    pub mirror_commands: usize,
    pub final_phase: Phase,
    pub command_log: Option<String>,
}

/// Nearest-rank percentile of unsorted samples; 0 for an empty set.
pub fn percentile(samples: &[f64], p: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * s.len() as f64).ceil() as usize;
    s[rank.clamp(1, s.len()) - 1]
}

fn ratio(num: u32, den: u32) -> f64 {
    if den == 0 {
        1.0
    } else {
        f64::from(num) / f64::from(den)
    }
}

fn exercise_reports(out: &RunOutput) -> Vec<ExerciseReport> {
    let mut kinds: Vec<ExerciseKind> = out.planted_reps.iter().map(|r| r.exercise).collect();
    kinds.extend(out.rep_events.iter().map(|e| e.exercise));
    kinds.sort();
    kinds.dedup();
    kinds
        .into_iter()
        .map(|kind| {
            let planted: Vec<&PlantedRep> = out
                .planted_reps
                .iter()
                .filter(|r| r.exercise == kind)
                .collect();
            let events: Vec<&RepEvent> = out
                .rep_events
                .iter()
                .filter(|e| e.exercise == kind)
                .collect();
            // Greedy in time order: each event claims the earliest open planted window.
            let mut claimed = vec![false; planted.len()];
            let mut matched_correct = 0;
            let mut false_positives = 0;
            for ev in &events {
                let t = ev.timestamp.seconds();
                let hit = planted.iter().enumerate().position(|(i, r)| {
                    !claimed[i]
                        && t >= r.start
                        && t <= r.end.unwrap_or(f64::INFINITY) + REP_MATCH_SLACK
                });
                match hit {
                    Some(i) => {
                        claimed[i] = true;
                        if ev.is_correct() && planted[i].expected == Verdict::Correct {
                            matched_correct += 1;
                        }
                    }
                    None => false_positives += 1,
                }
            }
            let planted_correct = planted
                .iter()
                .filter(|r| r.expected == Verdict::Correct)
                .count() as u32;
            let detected_correct = events.iter().filter(|e| e.is_correct()).count() as u32;
            ExerciseReport {
                exercise: kind,
                planted: planted.len() as u32,
                planted_correct,
                detected_correct,
                detected_incorrect: events.len() as u32 - detected_correct,
                matched_correct,
                false_positives,
                recall: ratio(matched_correct, planted_correct),
                precision: ratio(matched_correct, detected_correct),
            }
        })
        .collect()
}

fn attention_report(out: &RunOutput) -> Option<AttentionReport> {
    let labelled: Vec<&HeadFrame> = out
        .head_frames
        .iter()
        .filter(|h| h.planted_label.is_some())
        .collect();
    if labelled.is_empty() {
        return None;
    }
    let mut confusion: Vec<ConfusionCell> = Vec::new();
    let mut correct = 0;
    for h in &labelled {
        let planted = h.planted_label.expect("filtered above");
        if planted == h.predicted {
            correct += 1;
        }
        match confusion
            .iter_mut()
            .find(|c| c.planted == planted && c.predicted == h.predicted)
        {
            Some(c) => c.count += 1,
            None => confusion.push(ConfusionCell {
                planted,
                predicted: h.predicted,
                count: 1,
            }),
        }
    }
    confusion.sort_by_key(|c| (c.planted.as_str(), c.predicted.as_str()));
    Some(AttentionReport {
        frames: labelled.len() as u32,
        correct,
        accuracy: ratio(correct, labelled.len() as u32),
        confusion,
    })
}

fn pose_report(out: &RunOutput) -> Option<PoseReport> {
    let planted: Vec<&HeadFrame> = out
        .head_frames
        .iter()
        .filter(|h| h.planted_pose.is_some())
        .collect();
    if planted.is_empty() {
        return None;
    }
    let errors: Vec<f64> = planted
        .iter()
        .filter_map(|h| {
            h.estimate.map(|e| {
                e.rotation_distance(&h.planted_pose.expect("filtered above"))
                    .to_degrees()
            })
        })
        .collect();
    let failures = (planted.len() - errors.len()) as u32;
    Some(PoseReport {
        frames: planted.len() as u32,
        failures,
        mean_error_deg: if errors.is_empty() {
            0.0
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        },
        median_error_deg: percentile(&errors, 50.0),
        max_error_deg: errors.iter().copied().fold(0.0, f64::max),
    })
}

/// Summarises a run. Ground-truth sections are filled when the trace had them.
pub fn build_report(out: &RunOutput, command_log: Option<String>) -> RunReport {
    let commands: Vec<_> = out
        .journal
        .iter()
        .filter_map(|e| match e {
            JournalEntry::Command(c) => Some(c),
            _ => None,
        })
        .collect();
    RunReport {
        policy: out.policy.unwrap_or(FeedbackPolicy::TurnBased),
        frames_processed: out.frames,
        skipped_frames: out.skipped_frames,
        exercises: exercise_reports(out),
        attention: attention_report(out),
        head_pose: pose_report(out),
        latency: LatencyReport {
            frames: out.latencies_ms.len(),
            p50_ms: percentile(&out.latencies_ms, 50.0),
            p99_ms: percentile(&out.latencies_ms, 99.0),
            max_ms: out.latencies_ms.iter().copied().fold(0.0, f64::max),
        },
        commands: commands.len(),
        feedback_commands: commands.iter().filter(|c| c.is_feedback()).count(),
        mirror_commands: commands.iter().filter(|c| c.is_mirror()).count(),
        final_phase: out.final_phase.unwrap_or(Phase::Intro),
        command_log,
    }
}

/// Runs the trace and scores it against its annotations.
pub fn evaluate(records: &[TraceRecord], config: &CoachConfig) -> Result<RunReport, PipelineError> {
    if !records.iter().any(TraceRecord::is_annotation) {
        return Err(PipelineError::MissingAnnotations);
    }
    let out = run_pipeline(records, config)?;
    Ok(build_report(&out, None))
}

impl RunReport {
    /// Flat `metric,value,unit` rows for CSV export.
    pub fn metric_rows(&self) -> Vec<crate::trace::MetricRow> {
        use crate::trace::MetricRow as M;
        let mut rows = vec![
            M::new("frames_processed", self.frames_processed as f64, "count"),
            M::new("skipped_frames", self.skipped_frames as f64, "count"),
        ];
        for e in &self.exercises {
            let k = e.exercise.as_str();
            rows.push(M::new(
                format!("{k}.planted"),
                f64::from(e.planted),
                "count",
            ));
            rows.push(M::new(
                format!("{k}.planted_correct"),
                f64::from(e.planted_correct),
                "count",
            ));
            rows.push(M::new(
                format!("{k}.detected_correct"),
                f64::from(e.detected_correct),
                "count",
            ));
            rows.push(M::new(
                format!("{k}.detected_incorrect"),
                f64::from(e.detected_incorrect),
                "count",
            ));
            rows.push(M::new(
                format!("{k}.false_positives"),
                f64::from(e.false_positives),
                "count",
            ));
            rows.push(M::new(format!("{k}.recall"), e.recall, "ratio"));
            rows.push(M::new(format!("{k}.precision"), e.precision, "ratio"));
        }
        if let Some(a) = &self.attention {
            rows.push(M::new("attention.frames", f64::from(a.frames), "count"));
            rows.push(M::new("attention.accuracy", a.accuracy, "ratio"));
            for c in &a.confusion {
                rows.push(M::new(
                    format!("attention.{}.{}", c.planted.as_str(), c.predicted.as_str()),
                    f64::from(c.count),
                    "count",
                ));
            }
        }
        if let Some(p) = &self.head_pose {
            rows.push(M::new("head_pose.failures", f64::from(p.failures), "count"));
            rows.push(M::new("head_pose.mean_error", p.mean_error_deg, "deg"));
            rows.push(M::new("head_pose.median_error", p.median_error_deg, "deg"));
            rows.push(M::new("head_pose.max_error", p.max_error_deg, "deg"));
        }
        rows.push(M::new("latency.p50", self.latency.p50_ms, "ms"));
        rows.push(M::new("latency.p99", self.latency.p99_ms, "ms"));
        rows.push(M::new("latency.max", self.latency.max_ms, "ms"));
        rows.push(M::new("commands", self.commands as f64, "count"));
        rows.push(M::new(
            "feedback_commands",
            self.feedback_commands as f64,
            "count",
        ));
        rows.push(M::new(
            "mirror_commands",
            self.mirror_commands as f64,
            "count",
        ));
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::Keyword;
    use crate::generator::{generate_idle_trace, generate_trace, GeneratorParams, ScriptedSpeech};
    use crate::session::CommandKind;

    fn config(exercises: Vec<ExerciseKind>, policy: FeedbackPolicy) -> CoachConfig {
        let mut c = CoachConfig::default();
        c.session.exercises = exercises;
        c.session.policy = policy;
        c
    }

    #[test]
    fn percentile_nearest_rank() {
        let xs = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(percentile(&xs, 50.0), 3.0);
        assert_eq!(percentile(&xs, 99.0), 5.0);
        assert_eq!(percentile(&xs, 0.0), 1.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
    }

    #[test]
    fn full_session_counts_both_exercises() {
        let params = GeneratorParams {
            exercises: ExerciseKind::ALL.to_vec(),
            seed: 5,
            ..GeneratorParams::default()
        };
        let trace = generate_trace(&params).unwrap();
        let report = evaluate(
            &trace.records,
            &config(ExerciseKind::ALL.to_vec(), FeedbackPolicy::TurnBased),
        )
        .unwrap();
        for e in &report.exercises {
            assert_eq!(
                (e.planted, e.detected_correct, e.matched_correct),
                (5, 5, 5),
                "{e:?}"
            );
            assert_eq!(e.false_positives, 0);
        }
        assert_eq!(report.final_phase, Phase::SessionEnd);
        assert_eq!(report.feedback_commands, 10);
        assert_eq!(report.mirror_commands, 0);
        let pose = report.head_pose.unwrap();
        assert!(pose.max_error_deg < 0.1, "{pose:?}");
        assert_eq!(report.attention.unwrap().accuracy, 1.0);
    }

    #[test]
    fn low_stimulus_same_counts_no_feedback() {
        let trace = generate_trace(&GeneratorParams::default()).unwrap();
        let cfg = config(
            vec![ExerciseKind::ShoulderPress],
            FeedbackPolicy::LowStimulus,
        );
        let report = evaluate(&trace.records, &cfg).unwrap();
        assert_eq!(report.exercises[0].detected_correct, 5);
        assert_eq!(report.feedback_commands, 0);
        assert_eq!(report.mirror_commands, 0);
    }

    #[test]
    fn emergency_speech_ends_log() {
        let params = GeneratorParams {
            speech_script: vec![ScriptedSpeech {
                t: 6.0,
                keyword: Keyword::Emergency,
            }],
            ..GeneratorParams::default()
        };
        let trace = generate_trace(&params).unwrap();
        let out = run_pipeline(&trace.records, &CoachConfig::default()).unwrap();
        assert!(out.halted);
        assert_eq!(out.final_phase, Some(Phase::EmergencyStop));
        let last_transition = out
            .journal
            .iter()
            .rev()
            .find_map(|e| match e {
                JournalEntry::StateTransition(s) => Some(s),
                _ => None,
            })
            .unwrap();
        assert_eq!(last_transition.to, Phase::EmergencyStop);
        match &out.journal.last().unwrap() {
            JournalEntry::Command(c) => assert!(matches!(c.kind, CommandKind::Say(_))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unannotated_trace_cannot_be_evaluated() {
        let trace = generate_trace(&GeneratorParams::default()).unwrap();
        let bare: Vec<_> = trace
            .records
            .into_iter()
            .filter(|r| !r.is_annotation())
            .collect();
        assert!(matches!(
            evaluate(&bare, &CoachConfig::default()),
            Err(PipelineError::MissingAnnotations)
        ));
    }

    #[test]
    fn looking_away_while_still_restores_attention() {
        let params = GeneratorParams {
            attention_script: vec![crate::generator::AttentionSegment {
                start: 0.5,
                end: 7.0,
                label: AttentionDirection::FacingAway,
            }],
            lead_in: 10.0,
            reps: 1,
            ..GeneratorParams::default()
        };
        let trace = generate_trace(&params).unwrap();
        let out = run_pipeline(
            &trace.records,
            &config(vec![ExerciseKind::ShoulderPress], FeedbackPolicy::TurnBased),
        )
        .unwrap();
        let waves: Vec<_> = out
            .journal
            .iter()
            .filter_map(|e| match e {
                JournalEntry::Command(c) if c.kind == CommandKind::Wave => {
                    Some(c.timestamp.seconds())
                }
                _ => None,
            })
            .collect();
        assert_eq!(waves.len(), 1);
        assert!((waves[0] - 5.5).abs() < 0.05, "{waves:?}");
        assert!(out.journal.iter().any(|e| matches!(e,
            JournalEntry::StateTransition(s) if s.from == Phase::AttentionRestore && s.cause == "attentive")));
    }

    #[test]
    fn idle_trace_has_no_detections() {
        let trace = generate_idle_trace(
            &GeneratorParams {
                noise_joints: 0.01,
                ..GeneratorParams::default()
            },
            20.0,
        )
        .unwrap();
        let out = run_pipeline(&trace.records, &CoachConfig::default()).unwrap();
        assert!(out.rep_events.is_empty());
    }
}
