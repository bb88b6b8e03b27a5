//! Session configuration file.
//!
//! TOML with one table per module (`[session]`, `[exercise]`, `[head_pose]`,
//! `[attention]`, `[retarget]`). Missing keys take their defaults, unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::MonitorConfig;
use crate::exercise::{ExerciseKind, ExerciseSpec, SegmentationParams};
use crate::geometry::{CameraIntrinsics, Side};
use crate::head_pose::{AttentionThresholds, FaceModel, LmSettings};
use crate::retarget::{MotionThresholds, RobotArmModel};
use crate::session::SessionConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExerciseConfig {
    pub segmentation: SegmentationParams,
    pub shoulder_press: ExerciseSpec,
    pub side_lateral_raise: ExerciseSpec,
}

impl Default for ExerciseConfig {
    fn default() -> Self {
        Self {
            segmentation: SegmentationParams::default(),
            shoulder_press: ExerciseSpec::shoulder_press(Side::Left),
            side_lateral_raise: ExerciseSpec::side_lateral_raise(Side::Left),
        }
    }
}

impl ExerciseConfig {
    pub fn spec_for(&self, kind: ExerciseKind) -> &ExerciseSpec {
        match kind {
            ExerciseKind::ShoulderPress => &self.shoulder_press,
            ExerciseKind::SideLateralRaise => &self.side_lateral_raise,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadPoseConfig {
    pub camera: CameraIntrinsics,
    pub face_model: FaceModel,
    pub lm: LmSettings,
    pub thresholds: AttentionThresholds,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetargetConfig {
    pub model: RobotArmModel,
    pub thresholds: MotionThresholds,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoachConfig {
    pub session: SessionConfig,
    pub exercise: ExerciseConfig,
    pub head_pose: HeadPoseConfig,
    pub attention: MonitorConfig,
    pub retarget: RetargetConfig,
}

impl CoachConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.session.validate().map_err(|e| invalid(&e))?;
        self.exercise
            .segmentation
            .validate()
            .map_err(|e| invalid(&e))?;
        for kind in ExerciseKind::ALL {
            let spec = self.exercise.spec_for(kind);
            spec.validate().map_err(|e| invalid(&e))?;
            if spec.name != kind {
                return Err(ConfigError::Invalid(format!(
                    "exercise.{kind} has name {}",
                    spec.name
                )));
            }
            if spec.tracked_joint.side().is_none() {
                return Err(ConfigError::Invalid(format!(
                    "exercise.{kind} must track a left or right joint"
                )));
            }
        }
        self.head_pose.camera.validate().map_err(|e| invalid(&e))?;
        self.head_pose
            .face_model
            .validate()
            .map_err(|e| invalid(&e))?;
        let th = &self.head_pose.thresholds;
        if !(th.max_yaw > 0.0 && th.max_pitch > 0.0 && th.min_ear > 0.0) {
            return Err(ConfigError::Invalid(
                "attention thresholds must be positive".into(),
            ));
        }
        let m = &self.attention;
        if !(m.timeout > 0.0 && m.motion_window > 0.0 && m.motion_speed_threshold >= 0.0) {
            return Err(ConfigError::Invalid(
                "attention monitor settings out of range".into(),
            ));
        }
        self.retarget.model.validate().map_err(|e| invalid(&e))?;
        let rt = &self.retarget.thresholds;
        if !(rt.tiny >= 0.0 && rt.large > rt.tiny) {
            return Err(ConfigError::Invalid(
                "retarget thresholds need 0 ≤ tiny < large".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::FeedbackPolicy;

    const SHIPPED: &str = include_str!("../../../config/default.toml");

    #[test]
    fn shipped_file_equals_defaults() {
        assert_eq!(
            CoachConfig::from_toml_str(SHIPPED).unwrap(),
            CoachConfig::default()
        );
    }

    #[test]
    fn toml_round_trip() {
        let cfg = CoachConfig::default();
        assert_eq!(
            CoachConfig::from_toml_str(&cfg.to_toml_string()).unwrap(),
            cfg
        );
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg = CoachConfig::from_toml_str(
            "[session]\npolicy = \"mimicking\"\nreps_per_exercise = 3\n\n[attention]\ntimeout = 8.0\n",
        )
        .unwrap();
        assert_eq!(cfg.session.policy, FeedbackPolicy::Mimicking);
        assert_eq!(cfg.session.reps_per_exercise, 3);
        assert_eq!(cfg.attention.timeout, 8.0);
        assert_eq!(cfg.retarget, RetargetConfig::default());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            CoachConfig::from_toml_str("[session]\nvolume = 3\n"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            CoachConfig::from_toml_str("[session]\nreps_per_exercise = 0\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            CoachConfig::from_toml_str("[retarget.thresholds]\ntiny = 2.0\n"),
            Err(ConfigError::Invalid(_))
        ));
    }
}
