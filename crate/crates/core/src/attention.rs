//! Engagement tracking from head pose, activity and spoken keywords.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Timestamp, Vec3};
use crate::head_pose::AttentionDirection;

/// Slack when comparing elapsed time against the timeout, absorbing the
/// rounding of frame timestamps such as `k / 30`.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttentionError {
    #[error("timestamp {current} precedes last observation at {previous}")]
    NonMonotonicTimestamp {
        previous: Timestamp,
        current: Timestamp,
    },
    #[error("unknown keyword {0:?}")]
    UnknownKeyword(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keyword {
    Start,
    Stop,
    Help,
    Hurts,
    Emergency,
}

impl Keyword {
    pub const ALL: [Keyword; 5] = [
        Keyword::Start,
        Keyword::Stop,
        Keyword::Help,
        Keyword::Hurts,
        Keyword::Emergency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Start => "start",
            Keyword::Stop => "stop",
            Keyword::Help => "help",
            Keyword::Hurts => "hurts",
            Keyword::Emergency => "emergency",
        }
    }

    pub fn is_emergency(self) -> bool {
        matches!(self, Keyword::Help | Keyword::Hurts | Keyword::Emergency)
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Case-insensitive, whole-token match against the fixed keyword set.
impl FromStr for Keyword {
    type Err = AttentionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let token = s.trim();
        Keyword::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(token))
            .ok_or_else(|| AttentionError::UnknownKeyword(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechEvent {
    pub timestamp: Timestamp,
    pub keyword: Keyword,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionLabel {
    Attentive,
    Distracted,
    Interrupted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionState {
    pub label: AttentionLabel,
    pub seconds_in_label: f64,
    pub last_direction: Option<AttentionDirection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterruptionKind {
    AttentionLost,
    UserStop,
    Emergency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterruptionSource {
    Visual,
    Speech,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterruptionEvent {
    pub timestamp: Timestamp,
    pub kind: InterruptionKind,
    pub source: InterruptionSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Continuous distraction (s) after which attention counts as lost.
    pub timeout: f64,
    /// Tracked-joint speed (m/s) above which the person counts as active.
    pub motion_speed_threshold: f64,
    /// Window (s) over which that speed is measured.
    pub motion_window: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            timeout: 5.0,
            motion_speed_threshold: 0.05,
            motion_window: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttentionMonitor {
    config: MonitorConfig,
    label: AttentionLabel,
    label_since: Timestamp,
    distracted_since: Option<Timestamp>,
    last_timestamp: Option<Timestamp>,
    last_direction: Option<AttentionDirection>,
}

impl AttentionMonitor {
    pub fn new(config: MonitorConfig) -> Self {
        Self {
            config,
            label: AttentionLabel::Attentive,
            label_since: Timestamp::ZERO,
            distracted_since: None,
            last_timestamp: None,
            last_direction: None,
        }
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn state(&self) -> AttentionState {
        let now = self.last_timestamp.unwrap_or(self.label_since);
        AttentionState {
            label: self.label,
            seconds_in_label: now.since(self.label_since).max(0.0),
            last_direction: self.last_direction,
        }
    }

    fn advance(&mut self, t: Timestamp) -> Result<(), AttentionError> {
        if let Some(prev) = self.last_timestamp {
            if t < prev {
                return Err(AttentionError::NonMonotonicTimestamp {
                    previous: prev,
                    current: t,
                });
            }
        } else {
            self.label_since = t;
        }
        self.last_timestamp = Some(t);
        Ok(())
    }

    fn set_label(&mut self, label: AttentionLabel, t: Timestamp) {
        if self.label != label {
            self.label = label;
            self.label_since = t;
        }
    }

    /// Folds one visual observation into the attention state. A missing
    /// direction (no face found) counts as distracted.
    pub fn ingest_frame(
        &mut self,
        t: Timestamp,
        direction: Option<AttentionDirection>,
        person_moving: bool,
    ) -> Result<Option<InterruptionEvent>, AttentionError> {
        self.advance(t)?;
        self.last_direction = direction;
        let attentive = person_moving || direction == Some(AttentionDirection::FacingRobotEyesOpen);
        if attentive {
            self.distracted_since = None;
            self.set_label(AttentionLabel::Attentive, t);
            return Ok(None);
        }
        let since = *self.distracted_since.get_or_insert(t);
        match self.label {
            AttentionLabel::Interrupted => Ok(None),
            AttentionLabel::Attentive | AttentionLabel::Distracted => {
                if t.since(since) + TIME_SLACK >= self.config.timeout {
                    self.set_label(AttentionLabel::Interrupted, t);
                    Ok(Some(InterruptionEvent {
                        timestamp: t,
                        kind: InterruptionKind::AttentionLost,
                        source: InterruptionSource::Visual,
                    }))
                } else {
                    self.set_label(AttentionLabel::Distracted, t);
                    Ok(None)
                }
            }
        }
    }

    /// Maps a spoken keyword to an interruption. `start` is a session-control
    /// word and produces none.
    pub fn ingest_speech(
        &mut self,
        ev: &SpeechEvent,
    ) -> Result<Option<InterruptionEvent>, AttentionError> {
        self.advance(ev.timestamp)?;
        let kind = match ev.keyword {
            Keyword::Start => return Ok(None),
            Keyword::Stop => InterruptionKind::UserStop,
            Keyword::Help | Keyword::Hurts | Keyword::Emergency => InterruptionKind::Emergency,
        };
        Ok(Some(InterruptionEvent {
            timestamp: ev.timestamp,
            kind,
            source: InterruptionSource::Speech,
        }))
    }

    /// Like [`ingest_speech`](Self::ingest_speech) for an untyped transcript token.
    pub fn ingest_speech_token(
        &mut self,
        t: Timestamp,
        token: &str,
    ) -> Result<Option<InterruptionEvent>, AttentionError> {
        let keyword = token.parse()?;
        self.ingest_speech(&SpeechEvent {
            timestamp: t,
            keyword,
        })
    }
}

/// Decides whether a tracked joint is moving, from its net displacement over
/// a short window. Window endpoints are averaged over a few samples so
/// sensor jitter alone does not read as motion.
#[derive(Debug, Clone)]
pub struct ActivityDetector {
    window: f64,
    threshold: f64,
    samples: VecDeque<(Timestamp, Vec3)>,
}

const ENDPOINT_SAMPLES: usize = 3;

impl ActivityDetector {
    pub fn new(config: &MonitorConfig) -> Self {
        Self {
            window: config.motion_window,
            threshold: config.motion_speed_threshold,
            samples: VecDeque::new(),
        }
    }

    pub fn update(&mut self, t: Timestamp, p: Vec3) -> bool {
        self.samples.push_back((t, p));
        while self
            .samples
            .front()
            .is_some_and(|(s, _)| t.since(*s) > self.window + TIME_SLACK)
        {
            self.samples.pop_front();
        }
        self.speed().is_some_and(|s| s > self.threshold)
    }

    pub fn speed(&self) -> Option<f64> {
        let n = self.samples.len();
        if n < 2 {
            return None;
        }
        let k = ENDPOINT_SAMPLES.min(n / 2).max(1);
        let mean = |it: &mut dyn Iterator<Item = &(Timestamp, Vec3)>| {
            let (ts, ps) = it.fold((0.0, Vec3::ZERO), |(a, b), (t, p)| {
                (a + t.seconds(), b + *p)
            });
            (ts / k as f64, ps / k as f64)
        };
        let (t0, p0) = mean(&mut self.samples.iter().take(k));
        let (t1, p1) = mean(&mut self.samples.iter().skip(n - k));
        let dt = t1 - t0;
        (dt > 0.0).then(|| p0.distance(&p1) / dt)
    }
}
