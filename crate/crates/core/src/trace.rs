//! Line-delimited trace, session-log and metrics formats.
//!
//! Every line is one JSON object `{"t": seconds, "type": tag, "payload": {..}}`.
//! The payload carries the domain type's fields minus its timestamp, which
//! lives in `t`. Floats are written in shortest round-trip form and parsed
//! exactly, so `read(write(x)) == x` bit for bit.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::attention::{InterruptionEvent, SpeechEvent};
use crate::exercise::{ExerciseKind, RepEvent, Verdict};
use crate::geometry::{JointId, RigidPose, SkeletonFrame, Timestamp, Vec3};
use crate::head_pose::{AttentionDirection, EyeLandmarks, FacePoints, LandmarkSet2D, Pixel};
use crate::session::{BehaviorCommand, JournalEntry, StateTransition};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("line {line}: timestamp goes backwards")]
    UnsortedTrace { line: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Face landmarks and both eye contours seen in one camera image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    pub timestamp: Timestamp,
    pub points: FacePoints<Pixel>,
    pub left_eye: EyeLandmarks,
    pub right_eye: EyeLandmarks,
}

impl LandmarkFrame {
    pub fn face(&self) -> LandmarkSet2D {
        LandmarkSet2D {
            timestamp: self.timestamp,
            points: self.points,
        }
    }
}

/// Ground truth planted by the trace generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Annotation {
    ExerciseBegin {
        exercise: ExerciseKind,
    },
    RepStart {
        exercise: ExerciseKind,
        index: u32,
        amplitude: f64,
        expected: Verdict,
    },
    RepEnd {
        exercise: ExerciseKind,
        index: u32,
    },
    /// Head pose in the landmark camera's frame, held until the next one.
    PlantedPose {
        pose: RigidPose,
    },
    /// Attention direction, held until the next one.
    AttentionLabel {
        label: AttentionDirection,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceRecord {
    Skeleton(SkeletonFrame),
    Landmarks(LandmarkFrame),
    Speech(SpeechEvent),
    Annotation {
        timestamp: Timestamp,
        annotation: Annotation,
    },
}

impl TraceRecord {
    pub fn timestamp(&self) -> Timestamp {
        match self {
            TraceRecord::Skeleton(f) => f.timestamp,
            TraceRecord::Landmarks(l) => l.timestamp,
            TraceRecord::Speech(s) => s.timestamp,
            TraceRecord::Annotation { timestamp, .. } => *timestamp,
        }
    }

    pub fn type_tag(&self) -> &'static str {
        match self {
            TraceRecord::Skeleton(_) => "skeleton",
            TraceRecord::Landmarks(_) => "landmarks",
            TraceRecord::Speech(_) => "speech",
            TraceRecord::Annotation { .. } => "annotation",
        }
    }

    pub fn is_annotation(&self) -> bool {
        matches!(self, TraceRecord::Annotation { .. })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkeletonPayload {
    joints: BTreeMap<JointId, Vec3>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    confidence: BTreeMap<JointId, f64>,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    t: Timestamp,
    #[serde(rename = "type")]
    kind: String,
    payload: Value,
}

fn strip_timestamp<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("trace types serialize to JSON");
    if let Value::Object(map) = &mut v {
        map.remove("timestamp");
    }
    v
}

fn with_timestamp<T: for<'de> Deserialize<'de>>(
    payload: Value,
    t: Timestamp,
) -> Result<T, serde_json::Error> {
    let mut map = match payload {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    };
    map.insert("timestamp".into(), serde_json::to_value(t)?);
    serde_json::from_value(Value::Object(map))
}

fn envelope_line(t: Timestamp, kind: &str, payload: Value) -> String {
    serde_json::to_string(&Envelope {
        t,
        kind: kind.to_string(),
        payload,
    })
    .expect("envelope serializes")
}

/// One record as a single line (no trailing newline).
pub fn record_to_line(record: &TraceRecord) -> String {
    let payload = match record {
        TraceRecord::Skeleton(f) => serde_json::to_value(SkeletonPayload {
            joints: f.joints.clone(),
            confidence: f.confidence.clone(),
        })
        .expect("skeleton serializes"),
        TraceRecord::Landmarks(l) => strip_timestamp(l),
        TraceRecord::Speech(s) => strip_timestamp(s),
        TraceRecord::Annotation { annotation, .. } => {
            serde_json::to_value(annotation).expect("annotation serializes")
        }
    };
    envelope_line(record.timestamp(), record.type_tag(), payload)
}

fn parse_record(line: &str) -> Result<TraceRecord, String> {
    let env: Envelope = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let t = env.t;
    if !(t.seconds().is_finite() && t.seconds() >= 0.0) {
        return Err(format!("invalid timestamp {}", t.seconds()));
    }
    let err = |e: serde_json::Error| e.to_string();
    Ok(match env.kind.as_str() {
        "skeleton" => {
            let p: SkeletonPayload = serde_json::from_value(env.payload).map_err(err)?;
            if let Some((j, _)) = p.joints.iter().find(|(_, v)| !v.is_finite()) {
                return Err(format!("joint {j} is not finite"));
            }
            TraceRecord::Skeleton(SkeletonFrame {
                timestamp: t,
                joints: p.joints,
                confidence: p.confidence,
            })
        }
        "landmarks" => TraceRecord::Landmarks(with_timestamp(env.payload, t).map_err(err)?),
        "speech" => TraceRecord::Speech(with_timestamp(env.payload, t).map_err(err)?),
        "annotation" => TraceRecord::Annotation {
            timestamp: t,
            annotation: serde_json::from_value(env.payload).map_err(err)?,
        },
        other => return Err(format!("unknown record type {other:?}")),
    })
}

/// Parses a whole trace. Blank lines are skipped; line numbers are 1-based.
pub fn read_trace<R: BufRead>(source: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out: Vec<TraceRecord> = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_record(&line).map_err(|reason| TraceError::ParseError {
            line: line_no,
            reason,
        })?;
        if out
            .last()
            .is_some_and(|prev| rec.timestamp() < prev.timestamp())
        {
            return Err(TraceError::UnsortedTrace { line: line_no });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_trace_str(s: &str) -> Result<Vec<TraceRecord>, TraceError> {
    read_trace(s.as_bytes())
}

pub fn write_trace<W: Write>(mut sink: W, records: &[TraceRecord]) -> Result<(), TraceError> {
    for r in records {
        writeln!(sink, "{}", record_to_line(r))?;
    }
    sink.flush()?;
    Ok(())
}

pub fn trace_to_string(records: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, records).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

/// One journal entry as a session-log line.
pub fn journal_entry_to_line(entry: &JournalEntry) -> String {
    let (kind, payload) = match entry {
        JournalEntry::Command(c) => ("command", strip_timestamp(c)),
        JournalEntry::RepEvent(r) => ("rep_event", strip_timestamp(r)),
        JournalEntry::Interruption(i) => ("interruption", strip_timestamp(i)),
        JournalEntry::StateTransition(s) => ("state_transition", strip_timestamp(s)),
    };
    envelope_line(entry.timestamp(), kind, payload)
}

pub fn write_session_log<W: Write>(
    mut sink: W,
    journal: &[JournalEntry],
) -> Result<(), TraceError> {
    for e in journal {
        writeln!(sink, "{}", journal_entry_to_line(e))?;
    }
    sink.flush()?;
    Ok(())
}

pub fn session_log_to_string(journal: &[JournalEntry]) -> String {
    let mut buf = Vec::new();
    write_session_log(&mut buf, journal).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

pub fn read_session_log<R: BufRead>(source: R) -> Result<Vec<JournalEntry>, TraceError> {
    let mut out: Vec<JournalEntry> = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = || -> Result<JournalEntry, String> {
            let env: Envelope = serde_json::from_str(&line).map_err(|e| e.to_string())?;
            let t = env.t;
            let err = |e: serde_json::Error| e.to_string();
            Ok(match env.kind.as_str() {
                "command" => JournalEntry::Command(
                    with_timestamp::<BehaviorCommand>(env.payload, t).map_err(err)?,
                ),
                "rep_event" => {
                    JournalEntry::RepEvent(with_timestamp::<RepEvent>(env.payload, t).map_err(err)?)
                }
                "interruption" => JournalEntry::Interruption(
                    with_timestamp::<InterruptionEvent>(env.payload, t).map_err(err)?,
                ),
                "state_transition" => JournalEntry::StateTransition(
                    with_timestamp::<StateTransition>(env.payload, t).map_err(err)?,
                ),
                other => return Err(format!("unknown log entry type {other:?}")),
            })
        };
        let entry = parse().map_err(|reason| TraceError::ParseError {
            line: line_no,
            reason,
        })?;
        if out
            .last()
            .is_some_and(|prev| entry.timestamp() < prev.timestamp())
        {
            return Err(TraceError::UnsortedTrace { line: line_no });
        }
        out.push(entry);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
    pub unit: String,
}

impl MetricRow {
    pub fn new(metric: impl Into<String>, value: f64, unit: impl Into<String>) -> Self {
        Self {
            metric: metric.into(),
            value,
            unit: unit.into(),
        }
    }
}

/// Comma-separated table with a `metric,value,unit` header.
pub fn write_metrics_csv<W: Write>(mut sink: W, rows: &[MetricRow]) -> std::io::Result<()> {
    writeln!(sink, "metric,value,unit")?;
    for r in rows {
        debug_assert!(!r.metric.contains(',') && !r.unit.contains(','));
        writeln!(sink, "{},{},{}", r.metric, r.value, r.unit)?;
    }
    sink.flush()
}
