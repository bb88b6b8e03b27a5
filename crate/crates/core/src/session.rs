//! Coach state machine: sequences the session, applies the feedback policy
//! and emits behavior commands.
//!
//! The controller is a pure function of its config and the ordered inputs.
//! Every emitted command, consumed rep/interruption and phase change is
//! appended to a journal that serializes directly into the session log.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{InterruptionEvent, InterruptionKind, Keyword, SpeechEvent};
use crate::exercise::{ExerciseKind, FailureReason, RepEvent};
use crate::geometry::Timestamp;
use crate::retarget::RobotJointAngles;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("input at t={current} arrived after t={previous}")]
    OutOfOrderInput {
        previous: Timestamp,
        current: Timestamp,
    },
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("unknown feedback policy {0:?}")]
    UnknownPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackPolicy {
    LowStimulus,
    TurnBased,
    Mimicking,
}

impl FeedbackPolicy {
    pub const ALL: [FeedbackPolicy; 3] = [
        FeedbackPolicy::LowStimulus,
        FeedbackPolicy::TurnBased,
        FeedbackPolicy::Mimicking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackPolicy::LowStimulus => "low_stimulus",
            FeedbackPolicy::TurnBased => "turn_based",
            FeedbackPolicy::Mimicking => "mimicking",
        }
    }

    pub fn gives_feedback(self) -> bool {
        self != FeedbackPolicy::LowStimulus
    }
}

impl fmt::Display for FeedbackPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeedbackPolicy {
    type Err = SessionError;

    /// Accepts `turn_based` and `turn-based` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == norm)
            .ok_or_else(|| SessionError::UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Intro,
    ExerciseSetup,
    ExerciseActive,
    Feedback,
    AttentionRestore,
    Paused,
    EmergencyStop,
    SessionEnd,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Intro => "intro",
            Phase::ExerciseSetup => "exercise_setup",
            Phase::ExerciseActive => "exercise_active",
            Phase::Feedback => "feedback",
            Phase::AttentionRestore => "attention_restore",
            Phase::Paused => "paused",
            Phase::EmergencyStop => "emergency_stop",
            Phase::SessionEnd => "session_end",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::EmergencyStop | Phase::SessionEnd)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arg", rename_all = "snake_case")]
pub enum CommandKind {
    Say(String),
    Display(String),
    Demonstrate(ExerciseKind),
    Mirror(RobotJointAngles),
    Wave,
    StopMotion,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Say(_) => "say",
            CommandKind::Display(_) => "display",
            CommandKind::Demonstrate(_) => "demonstrate",
            CommandKind::Mirror(_) => "mirror",
            CommandKind::Wave => "wave",
            CommandKind::StopMotion => "stop_motion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorCommand {
    pub timestamp: Timestamp,
    #[serde(flatten)]
    pub kind: CommandKind,
    /// Phase that emitted the command.
    pub provenance: Phase,
}

impl BehaviorCommand {
    /// Spoken or displayed feedback on a repetition.
    pub fn is_feedback(&self) -> bool {
        self.provenance == Phase::Feedback
            && matches!(self.kind, CommandKind::Say(_) | CommandKind::Display(_))
    }

    pub fn is_mirror(&self) -> bool {
        matches!(self.kind, CommandKind::Mirror(_))
    }
}

/// Utterance table. `{exercise}`, `{count}` and `{target}` are substituted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Utterances {
    pub benefits: String,
    pub goal: String,
    pub trigger: String,
    pub next_exercise: String,
    pub correct: String,
    pub path_too_short: String,
    pub path_too_long: String,
    pub path_not_smooth: String,
    pub insufficient_excursion: String,
    pub attention_query: String,
    pub paused: String,
    pub resume: String,
    pub alert: String,
    pub pause_timeout: String,
    pub session_end: String,
}

impl Default for Utterances {
    fn default() -> Self {
        Self {
            benefits: "Moving a little every day keeps your joints supple and lifts your mood. Let's exercise together.".into(),
            goal: "Next up: {exercise}. Watch me first.".into(),
            trigger: "Now it is your turn. Do {target} {exercise}s with me.".into(),
            next_exercise: "Great work. Let's move on to the {exercise}.".into(),
            correct: "Well done, that is {count} of {target}.".into(),
            path_too_short: "That movement was too short. Reach a little further.".into(),
            path_too_long: "That movement was too long. Keep it compact.".into(),
            path_not_smooth: "That movement was not smooth. Move in one steady motion.".into(),
            insufficient_excursion: "Your arm did not go high enough. Lift it a bit more.".into(),
            attention_query: "What were you doing? Shall we carry on?".into(),
            paused: "Okay, let's take a break. Say start when you are ready.".into(),
            resume: "Welcome back, let's continue.".into(),
            alert: "I am stopping now. Help is on the way.".into(),
            pause_timeout: "Let's finish here for today.".into(),
            session_end: "That's all for today. Thank you for exercising with me!".into(),
        }
    }
}

impl Utterances {
    fn correction(&self, reason: FailureReason) -> &str {
        match reason {
            FailureReason::PathTooShort => &self.path_too_short,
            FailureReason::PathTooLong => &self.path_too_long,
            FailureReason::PathNotSmooth => &self.path_not_smooth,
            FailureReason::InsufficientExcursion => &self.insufficient_excursion,
        }
    }
}

fn fill(template: &str, exercise: ExerciseKind, count: u32, target: u32) -> String {
    template
        .replace("{exercise}", exercise.display_name())
        .replace("{count}", &count.to_string())
        .replace("{target}", &target.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub exercises: Vec<ExerciseKind>,
    pub reps_per_exercise: u32,
    pub policy: FeedbackPolicy,
    /// Seconds in `paused` before the session ends on its own.
    pub pause_timeout: f64,
    pub utterances: Utterances,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            exercises: vec![ExerciseKind::ShoulderPress, ExerciseKind::SideLateralRaise],
            reps_per_exercise: 5,
            policy: FeedbackPolicy::TurnBased,
            pause_timeout: 120.0,
            utterances: Utterances::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.exercises.is_empty() {
            return Err(SessionError::InvalidConfig("no exercises".into()));
        }
        if self.reps_per_exercise == 0 {
            return Err(SessionError::InvalidConfig(
                "reps_per_exercise must be ≥ 1".into(),
            ));
        }
        if !(self.pause_timeout > 0.0) {
            return Err(SessionError::InvalidConfig(
                "pause_timeout must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionInput {
    Rep(RepEvent),
    Interruption(InterruptionEvent),
    Speech(SpeechEvent),
    Angles(RobotJointAngles),
    /// Attention came back after an attention-lost interruption.
    Attentive(Timestamp),
    /// Explicit operator action; the only way out of `emergency_stop`.
    OperatorReset(Timestamp),
    Tick(Timestamp),
}

impl SessionInput {
    pub fn timestamp(&self) -> Timestamp {
        match self {
            SessionInput::Rep(r) => r.timestamp,
            SessionInput::Interruption(i) => i.timestamp,
            SessionInput::Speech(s) => s.timestamp,
            SessionInput::Angles(a) => a.timestamp,
            SessionInput::Attentive(t) | SessionInput::OperatorReset(t) | SessionInput::Tick(t) => {
                *t
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SessionInput::Rep(_) => "rep_event",
            SessionInput::Interruption(_) => "interruption",
            SessionInput::Speech(_) => "speech",
            SessionInput::Angles(_) => "joint_angles",
            SessionInput::Attentive(_) => "attentive",
            SessionInput::OperatorReset(_) => "operator_reset",
            SessionInput::Tick(_) => "tick",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTransition {
    pub timestamp: Timestamp,
    pub from: Phase,
    pub to: Phase,
    /// Input that caused the change.
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JournalEntry {
    Command(BehaviorCommand),
    RepEvent(RepEvent),
    Interruption(InterruptionEvent),
    StateTransition(StateTransition),
}

impl JournalEntry {
    pub fn timestamp(&self) -> Timestamp {
        match self {
            JournalEntry::Command(c) => c.timestamp,
            JournalEntry::RepEvent(r) => r.timestamp,
            JournalEntry::Interruption(i) => i.timestamp,
            JournalEntry::StateTransition(s) => s.timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub exercise_index: usize,
    pub reps_completed: u32,
}

#[derive(Debug, Clone)]
pub struct SessionController {
    config: SessionConfig,
    state: SessionState,
    /// Phase to return to from `attention_restore`.
    restore_to: Option<Phase>,
    /// Phase to return to from `paused`.
    resume_to: Option<Phase>,
    paused_since: Option<Timestamp>,
    last_input: Option<Timestamp>,
    total_reps: u32,
    journal: Vec<JournalEntry>,
}

impl SessionController {
    pub fn new(config: SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        Ok(Self {
            config,
            state: SessionState {
                phase: Phase::Intro,
                exercise_index: 0,
                reps_completed: 0,
            },
            restore_to: None,
            resume_to: None,
            paused_since: None,
            last_input: None,
            total_reps: 0,
            journal: Vec::new(),
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn policy(&self) -> FeedbackPolicy {
        self.config.policy
    }

    pub fn current_exercise(&self) -> ExerciseKind {
        self.config.exercises[self
            .state
            .exercise_index
            .min(self.config.exercises.len() - 1)]
    }

    /// Correct repetitions counted over the whole session.
    pub fn total_reps(&self) -> u32 {
        self.total_reps
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    /// Every emitted command, in order.
    pub fn command_log(&self) -> Vec<BehaviorCommand> {
        self.journal
            .iter()
            .filter_map(|e| match e {
                JournalEntry::Command(c) => Some(c.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn step(&mut self, input: SessionInput) -> Result<Vec<BehaviorCommand>, SessionError> {
        let t = input.timestamp();
        if let Some(prev) = self.last_input {
            if t < prev {
                return Err(SessionError::OutOfOrderInput {
                    previous: prev,
                    current: t,
                });
            }
        }
        self.last_input = Some(t);
        let start = self.journal.len();
        match input {
            SessionInput::Interruption(ev) => self.on_interruption(ev),
            SessionInput::Speech(ev) => self.on_speech(ev),
            SessionInput::Rep(ev) => self.on_rep(ev),
            SessionInput::Angles(a) => self.on_angles(a),
            SessionInput::Attentive(t) => self.on_attentive(t),
            SessionInput::OperatorReset(t) => self.on_reset(t),
            SessionInput::Tick(t) => self.on_tick(t),
        }
        Ok(self.journal[start..]
            .iter()
            .filter_map(|e| match e {
                JournalEntry::Command(c) => Some(c.clone()),
                _ => None,
            })
            .collect())
    }

    fn discard(&self, input: &str) {
        log::warn!("discarding {input} in phase {}", self.state.phase);
    }

    fn emit(&mut self, t: Timestamp, kind: CommandKind) {
        self.journal.push(JournalEntry::Command(BehaviorCommand {
            timestamp: t,
            kind,
            provenance: self.state.phase,
        }));
    }

    fn say(&mut self, t: Timestamp, template: &str) {
        let text = fill(
            template,
            self.current_exercise(),
            self.state.reps_completed,
            self.config.reps_per_exercise,
        );
        self.emit(t, CommandKind::Say(text));
    }

    fn transition(&mut self, t: Timestamp, to: Phase, cause: &str) {
        let from = self.state.phase;
        self.state.phase = to;
        self.journal
            .push(JournalEntry::StateTransition(StateTransition {
                timestamp: t,
                from,
                to,
                cause: cause.to_string(),
            }));
    }

    fn on_tick(&mut self, t: Timestamp) {
        match self.state.phase {
            Phase::Intro => {
                let u = self.config.utterances.benefits.clone();
                self.say(t, &u);
                self.transition(t, Phase::ExerciseSetup, "tick");
            }
            Phase::ExerciseSetup => {
                let u = self.config.utterances.goal.clone();
                self.say(t, &u);
                let ex = self.current_exercise();
                self.emit(t, CommandKind::Display(ex.display_name().to_string()));
                self.emit(t, CommandKind::Demonstrate(ex));
                let u = self.config.utterances.trigger.clone();
                self.say(t, &u);
                self.transition(t, Phase::ExerciseActive, "tick");
            }
            Phase::Paused => {
                let since = self.paused_since.unwrap_or(t);
                if t.since(since) >= self.config.pause_timeout {
                    let u = self.config.utterances.pause_timeout.clone();
                    self.say(t, &u);
                    self.transition(t, Phase::SessionEnd, "pause_timeout");
                    self.paused_since = None;
                    self.resume_to = None;
                }
            }
            _ => {}
        }
    }

    fn on_rep(&mut self, ev: RepEvent) {
        if self.state.phase != Phase::ExerciseActive {
            self.discard("rep_event");
            return;
        }
        if ev.exercise != self.current_exercise() {
            log::warn!(
                "discarding rep_event for {} during {}",
                ev.exercise,
                self.current_exercise()
            );
            return;
        }
        let t = ev.timestamp;
        let correct = ev.is_correct();
        let failure = ev.failure;
        self.journal.push(JournalEntry::RepEvent(ev));
        if correct {
            self.state.reps_completed += 1;
            self.total_reps += 1;
        }
        if self.config.policy.gives_feedback() {
            self.transition(t, Phase::Feedback, "rep_event");
            let text = match failure {
                None => self.config.utterances.correct.clone(),
                Some(r) => self.config.utterances.correction(r).to_string(),
            };
            self.say(t, &text);
        }
        if self.state.reps_completed >= self.config.reps_per_exercise {
            self.advance_exercise(t);
        } else if self.state.phase == Phase::Feedback {
            self.transition(t, Phase::ExerciseActive, "feedback_done");
        }
    }

    fn advance_exercise(&mut self, t: Timestamp) {
        if self.state.exercise_index + 1 < self.config.exercises.len() {
            self.state.exercise_index += 1;
            self.state.reps_completed = 0;
            self.transition(t, Phase::ExerciseSetup, "target_reached");
            let u = self.config.utterances.next_exercise.clone();
            self.say(t, &u);
        } else {
            self.transition(t, Phase::SessionEnd, "target_reached");
            let u = self.config.utterances.session_end.clone();
            self.say(t, &u);
        }
    }

    fn on_angles(&mut self, a: RobotJointAngles) {
        if self.config.policy == FeedbackPolicy::Mimicking
            && self.state.phase == Phase::ExerciseActive
        {
            self.emit(a.timestamp, CommandKind::Mirror(a));
        }
    }

    fn on_interruption(&mut self, ev: InterruptionEvent) {
        let t = ev.timestamp;
        let phase = self.state.phase;
        match ev.kind {
            InterruptionKind::Emergency => {
                if phase == Phase::EmergencyStop {
                    self.discard("emergency");
                    return;
                }
                self.journal.push(JournalEntry::Interruption(ev));
                self.transition(t, Phase::EmergencyStop, "emergency");
                self.emit(t, CommandKind::StopMotion);
                let u = self.config.utterances.alert.clone();
                self.say(t, &u);
            }
            InterruptionKind::UserStop => {
                if phase.is_terminal() || phase == Phase::Paused {
                    self.discard("user_stop");
                    return;
                }
                self.journal.push(JournalEntry::Interruption(ev));
                self.resume_to = Some(match phase {
                    Phase::AttentionRestore => {
                        self.restore_to.take().unwrap_or(Phase::ExerciseActive)
                    }
                    Phase::Feedback => Phase::ExerciseActive,
                    p => p,
                });
                self.paused_since = Some(t);
                self.transition(t, Phase::Paused, "user_stop");
                self.emit(t, CommandKind::StopMotion);
                let u = self.config.utterances.paused.clone();
                self.say(t, &u);
            }
            InterruptionKind::AttentionLost => {
                if !matches!(
                    phase,
                    Phase::Intro | Phase::ExerciseSetup | Phase::ExerciseActive | Phase::Feedback
                ) {
                    self.discard("attention_lost");
                    return;
                }
                self.journal.push(JournalEntry::Interruption(ev));
                self.restore_to = Some(if phase == Phase::Feedback {
                    Phase::ExerciseActive
                } else {
                    phase
                });
                self.transition(t, Phase::AttentionRestore, "attention_lost");
                self.emit(t, CommandKind::Wave);
                let u = self.config.utterances.attention_query.clone();
                self.say(t, &u);
            }
        }
    }

    fn on_speech(&mut self, ev: SpeechEvent) {
        match ev.keyword {
            Keyword::Start if self.state.phase == Phase::Paused => {
                let to = self.resume_to.take().unwrap_or(Phase::ExerciseSetup);
                self.paused_since = None;
                self.transition(ev.timestamp, to, "start");
                let u = self.config.utterances.resume.clone();
                self.say(ev.timestamp, &u);
            }
            Keyword::Start => self.discard("start"),
            // Other keywords reach the controller as interruptions.
            _ => {}
        }
    }

    fn on_attentive(&mut self, t: Timestamp) {
        if self.state.phase != Phase::AttentionRestore {
            return;
        }
        let to = self.restore_to.take().unwrap_or(Phase::ExerciseActive);
        self.transition(t, to, "attentive");
    }

    fn on_reset(&mut self, t: Timestamp) {
        if self.state.phase != Phase::EmergencyStop {
            self.discard("operator_reset");
            return;
        }
        // The current exercise is re-introduced once the person says start.
        self.resume_to = Some(Phase::ExerciseSetup);
        self.paused_since = Some(t);
        self.transition(t, Phase::Paused, "operator_reset");
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::attention::InterruptionSource;
    use crate::exercise::Verdict;
    use proptest::prelude::*;

    #[derive(Debug, Clone)]
    enum Ev {
        Tick,
        Correct,
        Wrong,
        Lost,
        Back,
        Stop,
        Start,
        Emergency,
    }

    fn ev() -> impl Strategy<Value = Ev> {
        prop_oneof![
            3 => Just(Ev::Tick),
            4 => Just(Ev::Correct),
            2 => Just(Ev::Wrong),
            1 => Just(Ev::Lost),
            1 => Just(Ev::Back),
            1 => Just(Ev::Stop),
            1 => Just(Ev::Start),
            1 => Just(Ev::Emergency),
        ]
    }

    fn to_input(e: &Ev, t: Timestamp, exercise: ExerciseKind) -> SessionInput {
        let intr = |kind| {
            SessionInput::Interruption(InterruptionEvent {
                timestamp: t,
                kind,
                source: InterruptionSource::Visual,
            })
        };
        let rep = |failure: Option<FailureReason>| {
            SessionInput::Rep(RepEvent {
                exercise,
                verdict: if failure.is_none() {
                    Verdict::Correct
                } else {
                    Verdict::Incorrect
                },
                failure,
                path_length: 1.0,
                max_segment_angle: 0.3,
                excursion: 0.4,
                rep_index: 0,
                timestamp: t,
            })
        };
        match e {
            Ev::Tick => SessionInput::Tick(t),
            Ev::Correct => rep(None),
            Ev::Wrong => rep(Some(FailureReason::PathTooShort)),
            Ev::Lost => intr(InterruptionKind::AttentionLost),
            Ev::Back => SessionInput::Attentive(t),
            Ev::Stop => intr(InterruptionKind::UserStop),
            Ev::Start => SessionInput::Speech(SpeechEvent {
                timestamp: t,
                keyword: Keyword::Start,
            }),
            Ev::Emergency => intr(InterruptionKind::Emergency),
        }
    }

    fn run(events: &[Ev], policy: FeedbackPolicy) -> SessionController {
        let mut s = SessionController::new(SessionConfig {
            policy,
            ..SessionConfig::default()
        })
        .unwrap();
        for (i, e) in events.iter().enumerate() {
            let t = Timestamp::new(i as f64 * 0.5).unwrap();
            let input = to_input(e, t, s.current_exercise());
            s.step(input).unwrap();
            assert!(s.state().reps_completed <= s.config().reps_per_exercise);
        }
        s
    }

    proptest! {
        #[test]
        fn controller_invariants(events in prop::collection::vec(ev(), 0..80), p in 0usize..3) {
            let policy = FeedbackPolicy::ALL[p];
            let s = run(&events, policy);
            let log = s.command_log();

            // Emergency stop is absorbing: nothing follows the stop alert.
            if let Some(i) = log.iter().position(|c| c.kind == CommandKind::StopMotion && c.provenance == Phase::EmergencyStop) {
                prop_assert_eq!(log.len(), i + 2);
                prop_assert_eq!(s.phase(), Phase::EmergencyStop);
            }
            if policy == FeedbackPolicy::LowStimulus {
                prop_assert!(log.iter().all(|c| !c.is_feedback()));
            }
            prop_assert!(log.iter().all(|c| !c.is_mirror()));
            // Each wave opens a separate restore episode.
            let entries = s.journal().iter().filter(|e| matches!(e,
                JournalEntry::StateTransition(StateTransition { to: Phase::AttentionRestore, .. }))).count();
            let waves = log.iter().filter(|c| c.kind == CommandKind::Wave).count();
            prop_assert_eq!(waves, entries);
            prop_assert!(log.iter().filter(|c| c.kind == CommandKind::Wave).all(|c| c.provenance == Phase::AttentionRestore));
            // Counted reps equal consumed correct rep events.
            let consumed = s.journal().iter().filter(|e| matches!(e, JournalEntry::RepEvent(r) if r.is_correct())).count();
            prop_assert_eq!(s.total_reps() as usize, consumed);
            prop_assert!(log.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        }

        #[test]
        fn replay_is_deterministic(events in prop::collection::vec(ev(), 0..60), p in 0usize..3) {
            let policy = FeedbackPolicy::ALL[p];
            let a = run(&events, policy).command_log();
            let b = run(&events, policy).command_log();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }
}
