//! Perception and control engine for a robot exercise coach.
//!
//! Skeleton frames drive rep counting and arm retargeting, facial landmarks
//! drive head pose and attention, and a session controller turns both into
//! robot behavior commands. Traces and session logs are JSON Lines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod config;
pub mod exercise;
pub mod generator;
pub mod geometry;
pub mod head_pose;
pub mod pipeline;
pub mod retarget;
pub mod session;
pub mod trace;

pub use config::{CoachConfig, ConfigError};
pub use exercise::{ExerciseEngine, ExerciseKind, ExerciseSpec, RepEvent, Verdict};
pub use generator::{
    generate_idle_trace, generate_trace, GeneratedTrace, GeneratorError, GeneratorParams,
};
pub use geometry::{CameraIntrinsics, JointId, RigidPose, Side, SkeletonFrame, Timestamp, Vec3};
pub use head_pose::{estimate_head_pose, AttentionDirection, HeadPoseEstimate};
pub use pipeline::{evaluate, run_pipeline, PipelineError, RunOutput, RunReport};
pub use retarget::{retarget, Retargeter, RobotArmModel, RobotJointAngles};
pub use session::{BehaviorCommand, FeedbackPolicy, Phase, SessionController};
pub use trace::{read_trace, write_session_log, write_trace, TraceError, TraceRecord};
