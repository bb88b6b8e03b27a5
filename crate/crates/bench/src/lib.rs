//! Shared fixtures for the criterion benches.

use coach_core::geometry::{project_point, RigidPose, Timestamp, Vec3};
use coach_core::head_pose::{LandmarkSet2D, Pixel};
use coach_core::{generate_trace, CoachConfig, ExerciseKind, GeneratorParams, TraceRecord};

/// Both exercises with realistic sensor noise.
pub fn noisy_session_trace() -> Vec<TraceRecord> {
    let params = GeneratorParams {
        exercises: ExerciseKind::ALL.to_vec(),
        noise_joints: 0.01,
        noise_pixels: 1.0,
        seed: 42,
        ..GeneratorParams::default()
    };
    generate_trace(&params)
        .expect("default params are valid")
        .records
}

/// Noise-free landmarks of the default face model under a turned head.
pub fn turned_head_landmarks(config: &CoachConfig) -> LandmarkSet2D {
    let pose = RigidPose::from_yaw_pitch_roll(0.4, -0.2, 0.1, Vec3::new(0.05, 0.02, 1.2));
    let k = &config.head_pose.camera;
    LandmarkSet2D {
        timestamp: Timestamp::ZERO,
        points: config.head_pose.face_model.map(|p| {
            let (u, v) = project_point(p, &pose, k).expect("face is in front of the camera");
            Pixel::new(u, v)
        }),
    }
}
