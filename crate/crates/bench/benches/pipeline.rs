use std::hint::black_box;

use coach_bench::{noisy_session_trace, turned_head_landmarks};
use coach_core::exercise::ExerciseEngine;
use coach_core::geometry::Side;
use coach_core::head_pose::estimate_head_pose;
use coach_core::retarget::{ArmObservation, Retargeter};
use coach_core::{run_pipeline, CoachConfig, ExerciseKind, TraceRecord};
use criterion::{criterion_group, criterion_main, Criterion};

fn head_pose(c: &mut Criterion) {
    let config = CoachConfig::default();
    let lm = turned_head_landmarks(&config);
    let hp = &config.head_pose;
    c.bench_function("estimate_head_pose", |b| {
        b.iter(|| estimate_head_pose(black_box(&lm), &hp.face_model, &hp.camera, &hp.lm))
    });
}

fn skeleton_paths(c: &mut Criterion) {
    let config = CoachConfig::default();
    let frames: Vec<_> = noisy_session_trace()
        .into_iter()
        .filter_map(|r| match r {
            TraceRecord::Skeleton(f) => Some(f),
            _ => None,
        })
        .collect();
    c.bench_function("exercise_engine_trace", |b| {
        b.iter(|| {
            let spec = config
                .exercise
                .spec_for(ExerciseKind::ShoulderPress)
                .clone();
            let mut engine =
                ExerciseEngine::new(spec, config.exercise.segmentation.clone()).unwrap();
            for f in &frames {
                black_box(engine.update(f).ok());
            }
        })
    });
    let arms: Vec<_> = frames
        .iter()
        .filter_map(|f| ArmObservation::from_frame(f, Side::Left).ok())
        .collect();
    c.bench_function("retarget_trace", |b| {
        b.iter(|| {
            let mut r = Retargeter::new(
                config.retarget.model.clone(),
                config.retarget.thresholds.clone(),
            )
            .unwrap();
            for a in &arms {
                black_box(r.update(a).ok());
            }
        })
    });
}

fn full_pipeline(c: &mut Criterion) {
    let config = CoachConfig::default();
    let records = noisy_session_trace();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("run_pipeline_session", |b| {
        b.iter(|| run_pipeline(black_box(&records), &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, head_pose, skeleton_paths, full_pipeline);
criterion_main!(benches);
