//! Head pose from 2D facial landmarks and eye openness.
//!
//! The pose of a generic six-point face model is recovered from its image
//! correspondences in two stages: a normalized direct linear transform gives
//! a starting pose, which Levenberg-Marquardt then refines by minimizing the
//! summed squared reprojection error over the six pose parameters (an
//! axis-angle rotation increment and a translation).

use nalgebra::{DMatrix, Matrix3, Matrix4, Matrix6, Rotation3, Vector3, Vector6, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{project_point, CameraIntrinsics, GeometryError, RigidPose, Timestamp, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeadPoseError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("optimizer diverged: damping reached {lambda:e} without an accepted step")]
    DivergedPose { lambda: f64 },
    #[error("degenerate eye landmarks: corner distance {0:e} px")]
    DegenerateEye(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Image position in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

impl From<[f64; 2]> for Pixel {
    fn from(a: [f64; 2]) -> Self {
        Pixel::new(a[0], a[1])
    }
}

impl From<Pixel> for [f64; 2] {
    fn from(p: Pixel) -> Self {
        [p.u, p.v]
    }
}

impl From<(f64, f64)> for Pixel {
    fn from((u, v): (f64, f64)) -> Self {
        Pixel::new(u, v)
    }
}

/// One value per face-model point, in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacePoints<T> {
    pub nose_tip: T,
    pub chin: T,
    pub left_eye_corner: T,
    pub right_eye_corner: T,
    pub left_mouth_corner: T,
    pub right_mouth_corner: T,
}

impl<T: Copy> FacePoints<T> {
    pub fn to_array(&self) -> [T; 6] {
        [
            self.nose_tip,
            self.chin,
            self.left_eye_corner,
            self.right_eye_corner,
            self.left_mouth_corner,
            self.right_mouth_corner,
        ]
    }

    pub fn from_array(a: [T; 6]) -> Self {
        Self {
            nose_tip: a[0],
            chin: a[1],
            left_eye_corner: a[2],
            right_eye_corner: a[3],
            left_mouth_corner: a[4],
            right_mouth_corner: a[5],
        }
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> FacePoints<U> {
        FacePoints::from_array(self.to_array().map(f))
    }
}

/// Generic 3D face in a head-local frame (meters, origin at the nose tip).
pub type FaceModel = FacePoints<Vec3>;

impl Default for FacePoints<Vec3> {
    fn default() -> Self {
        Self {
            nose_tip: Vec3::new(0.0, 0.0, 0.0),
            chin: Vec3::new(0.0, -0.110, -0.020),
            left_eye_corner: Vec3::new(-0.0450, 0.0520, -0.030),
            right_eye_corner: Vec3::new(0.0450, 0.0520, -0.030),
            left_mouth_corner: Vec3::new(-0.0300, -0.0450, -0.025),
            right_mouth_corner: Vec3::new(0.0300, -0.0450, -0.025),
        }
    }
}

impl FacePoints<Vec3> {
    /// Rejects models whose points do not span three dimensions.
    pub fn validate(&self) -> Result<(), HeadPoseError> {
        let pts = self.to_array();
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(HeadPoseError::DegenerateConfiguration(
                "face model has non-finite coordinates".into(),
            ));
        }
        let mean = pts.iter().fold(Vec3::ZERO, |a, p| a + *p) / 6.0;
        let mut cov = Matrix3::zeros();
        for p in &pts {
            let d = (*p - mean).to_na();
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigenvalues();
        let max = eig.max();
        let min = eig.min();
        if !(max > 0.0) || min <= 1e-9 * max {
            return Err(HeadPoseError::DegenerateConfiguration(
                "face model points are coplanar or collinear".into(),
            ));
        }
        Ok(())
    }
}

/// Detected image positions of the face-model points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkSet2D {
    pub timestamp: Timestamp,
    pub points: FacePoints<Pixel>,
}

impl LandmarkSet2D {
    pub fn is_finite(&self) -> bool {
        self.points.to_array().iter().all(Pixel::is_finite)
    }
}

/// Six eye contour points: `p1`/`p4` the horizontal corners, `p2`,`p3` the
/// upper lid and `p5`,`p6` the lower lid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EyeLandmarks {
    pub points: [Pixel; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadPoseEstimate {
    pub pose: RigidPose,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub rms_error: f64,
    pub iterations: u32,
    pub converged: bool,
    /// Summed squared error after the initial pose and after each accepted step.
    pub accepted_costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmSettings {
    pub initial_lambda: f64,
    pub lambda_increase: f64,
    pub lambda_decrease: f64,
    pub max_lambda: f64,
    pub max_iterations: u32,
    pub gradient_tolerance: f64,
    pub cost_change_tolerance: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            initial_lambda: 1e-3,
            lambda_increase: 10.0,
            lambda_decrease: 10.0,
            max_lambda: 1e8,
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            cost_change_tolerance: 1e-10,
        }
    }
}

/// Linear pose estimate from landmark correspondences.
pub fn solve_dlt(
    landmarks: &LandmarkSet2D,
    model: &FaceModel,
    k: &CameraIntrinsics,
) -> Result<RigidPose, HeadPoseError> {
    dlt(&model.to_array(), &landmarks.points.to_array(), k)
}

/// DLT over arbitrary correspondences (at least six, not coplanar).
pub fn dlt(
    object: &[Vec3],
    image: &[Pixel],
    k: &CameraIntrinsics,
) -> Result<RigidPose, HeadPoseError> {
    k.validate()?;
    let n = object.len();
    if n < 6 || image.len() != n {
        return Err(HeadPoseError::DegenerateConfiguration(format!(
            "need at least 6 matched correspondences, got {n} object / {} image",
            image.len()
        )));
    }

    // Normalized camera coordinates, then a similarity so the centroid is at
    // the origin and the mean distance is sqrt(2).
    let rays: Vec<(f64, f64)> = image
        .iter()
        .map(|p| ((p.u - k.cx) / k.fx, (p.v - k.cy) / k.fy))
        .collect();
    let (mx, my) = rays
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (mx / n as f64, my / n as f64);
    let spread2 = rays
        .iter()
        .map(|(x, y)| (x - mx).hypot(y - my))
        .sum::<f64>()
        / n as f64;
    if !(spread2 > 1e-12) {
        return Err(HeadPoseError::DegenerateConfiguration(
            "image points have no spatial extent".into(),
        ));
    }
    let s2 = std::f64::consts::SQRT_2 / spread2;
    let t2 = Matrix3::new(s2, 0.0, -s2 * mx, 0.0, s2, -s2 * my, 0.0, 0.0, 1.0);

    let centroid = object.iter().fold(Vec3::ZERO, |a, p| a + *p) / n as f64;
    let spread3 = object.iter().map(|p| p.distance(&centroid)).sum::<f64>() / n as f64;
    if !(spread3 > 1e-12) {
        return Err(HeadPoseError::DegenerateConfiguration(
            "object points have no spatial extent".into(),
        ));
    }
    let s3 = 3f64.sqrt() / spread3;
    #[rustfmt::skip]
    let u3 = Matrix4::new(
        s3, 0.0, 0.0, -s3 * centroid.x,
        0.0, s3, 0.0, -s3 * centroid.y,
        0.0, 0.0, s3, -s3 * centroid.z,
        0.0, 0.0, 0.0, 1.0,
    );

    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, (obj, (x, y))) in object.iter().zip(&rays).enumerate() {
        let xs = (obj.x - centroid.x) * s3;
        let ys = (obj.y - centroid.y) * s3;
        let zs = (obj.z - centroid.z) * s3;
        let xh = [xs, ys, zs, 1.0];
        let u = s2 * (x - mx);
        let v = s2 * (y - my);
        for j in 0..4 {
            a[(2 * i, j)] = xh[j];
            a[(2 * i, 8 + j)] = -u * xh[j];
            a[(2 * i + 1, 4 + j)] = xh[j];
            a[(2 * i + 1, 8 + j)] = -v * xh[j];
        }
    }

    let svd = SVD::new(a, false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| HeadPoseError::DegenerateConfiguration("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sv = &svd.singular_values;
    let largest = sv[order[order.len() - 1]];
    // A one-dimensional null space is required; a second tiny singular value
    // means the correspondences do not pin down the projection.
    if order.len() < 12 || !(sv[order[1]] > 1e-10 * largest) {
        return Err(HeadPoseError::DegenerateConfiguration(
            "linear system is rank-deficient".into(),
        ));
    }
    let p = v_t.row(order[0]);
    let p_norm = nalgebra::Matrix3x4::from_fn(|r, c| p[4 * r + c]);
    let mut proj = t2.try_inverse().expect("similarity is invertible") * p_norm * u3;

    let mut m: Matrix3<f64> = proj.fixed_view::<3, 3>(0, 0).into_owned();
    if m.determinant() < 0.0 {
        proj = -proj;
        m = -m;
    }
    let msvd = m.svd(true, true);
    let (u, vt) = (msvd.u.unwrap(), msvd.v_t.unwrap());
    let mut rotation = u * vt;
    if rotation.determinant() < 0.0 {
        // Only reachable when det(m) is numerically zero.
        return Err(HeadPoseError::DegenerateConfiguration(
            "linear estimate has no proper rotation".into(),
        ));
    }
    rotation = orthonormalize(&rotation);
    let scale = msvd.singular_values.sum() / 3.0;
    if !(scale > 0.0) {
        return Err(HeadPoseError::DegenerateConfiguration(
            "linear estimate has zero scale".into(),
        ));
    }
    let t = proj.column(3) / scale;
    Ok(RigidPose::new(rotation, Vec3::new(t.x, t.y, t.z)))
}

fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let mut rot = Rotation3::from_matrix_unchecked(*r);
    rot.renormalize();
    rot.into_inner()
}

/// Reprojection residuals (projected minus observed, `u` then `v` per point)
/// and their derivatives with respect to `[ω, t]`, where the rotation is
/// perturbed on the left as `exp(ω)·R`.
pub fn reprojection_jacobian(
    pose: &RigidPose,
    object: &[Vec3],
    image: &[Pixel],
    k: &CameraIntrinsics,
) -> Result<(Vec<f64>, Vec<[f64; 6]>), HeadPoseError> {
    let mut residuals = Vec::with_capacity(2 * object.len());
    let mut jac = Vec::with_capacity(2 * object.len());
    for (obj, obs) in object.iter().zip(image) {
        let rx = Vec3::from_na(&(pose.rotation * obj.to_na()));
        let c = rx + pose.translation;
        if !(c.z > crate::geometry::MIN_DEPTH) {
            return Err(GeometryError::BehindCamera(c.z).into());
        }
        let iz = 1.0 / c.z;
        residuals.push(k.fx * c.x * iz + k.cx - obs.u);
        residuals.push(k.fy * c.y * iz + k.cy - obs.v);

        let du = [k.fx * iz, 0.0, -k.fx * c.x * iz * iz];
        let dv = [0.0, k.fy * iz, -k.fy * c.y * iz * iz];
        // d(c)/d(ω) = -[Rx]_×
        let dw = [[0.0, rx.z, -rx.y], [-rx.z, 0.0, rx.x], [rx.y, -rx.x, 0.0]];
        for d in [du, dv] {
            let mut row = [0.0; 6];
            for col in 0..3 {
                row[col] = d[0] * dw[0][col] + d[1] * dw[1][col] + d[2] * dw[2][col];
                row[3 + col] = d[col];
            }
            jac.push(row);
        }
    }
    Ok((residuals, jac))
}

fn cost_at(
    pose: &RigidPose,
    object: &[Vec3],
    image: &[Pixel],
    k: &CameraIntrinsics,
) -> Option<f64> {
    let mut sum = 0.0;
    for (obj, obs) in object.iter().zip(image) {
        let (u, v) = project_point(*obj, pose, k).ok()?;
        sum += (u - obs.u).powi(2) + (v - obs.v).powi(2);
    }
    Some(sum)
}

/// Applies the increment `[ω, δt]` to a pose.
pub fn apply_increment(pose: &RigidPose, delta: &[f64; 6]) -> RigidPose {
    let w = Rotation3::new(Vector3::new(delta[0], delta[1], delta[2]));
    RigidPose::new(
        orthonormalize(&(w.into_inner() * pose.rotation)),
        pose.translation + Vec3::new(delta[3], delta[4], delta[5]),
    )
}

/// Refines a pose by damped Gauss-Newton on the reprojection error.
pub fn refine_lm(
    initial: &RigidPose,
    landmarks: &LandmarkSet2D,
    model: &FaceModel,
    k: &CameraIntrinsics,
    settings: &LmSettings,
) -> Result<HeadPoseEstimate, HeadPoseError> {
    refine_correspondences(
        initial,
        &model.to_array(),
        &landmarks.points.to_array(),
        k,
        settings,
    )
}

pub fn refine_correspondences(
    initial: &RigidPose,
    object: &[Vec3],
    image: &[Pixel],
    k: &CameraIntrinsics,
    settings: &LmSettings,
) -> Result<HeadPoseEstimate, HeadPoseError> {
    let mut pose = *initial;
    let mut lambda = settings.initial_lambda;
    let (mut residuals, mut jac) = reprojection_jacobian(&pose, object, image, k)?;
    let mut cost: f64 = residuals.iter().map(|r| r * r).sum();
    let mut accepted_costs = vec![cost];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iterations {
        let mut jtj = Matrix6::<f64>::zeros();
        let mut grad = Vector6::<f64>::zeros();
        for (row, r) in jac.iter().zip(&residuals) {
            let row = Vector6::from_row_slice(row);
            jtj += row * row.transpose();
            grad += row * *r;
        }
        if grad.amax() < settings.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut stepped = false;
        loop {
            let mut damped = jtj;
            for i in 0..6 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let candidate = damped
                .cholesky()
                .map(|c| c.solve(&(-grad)))
                .map(|d| apply_increment(&pose, &[d[0], d[1], d[2], d[3], d[4], d[5]]))
                .and_then(|p| cost_at(&p, object, image, k).map(|c| (p, c)));
            match candidate {
                Some((next, next_cost)) if next_cost < cost => {
                    let change = cost - next_cost;
                    pose = next;
                    cost = next_cost;
                    accepted_costs.push(cost);
                    lambda = (lambda / settings.lambda_decrease).max(f64::MIN_POSITIVE);
                    if change < settings.cost_change_tolerance {
                        converged = true;
                    }
                    stepped = true;
                    break;
                }
                Some((_, next_cost))
                    if (cost - next_cost).abs() < settings.cost_change_tolerance =>
                {
                    // The step no longer changes the error: we are at the minimum.
                    converged = true;
                    break;
                }
                _ => {
                    lambda *= settings.lambda_increase;
                    if lambda > settings.max_lambda {
                        return Err(HeadPoseError::DivergedPose { lambda });
                    }
                }
            }
        }
        if converged {
            break;
        }
        if stepped {
            (residuals, jac) = reprojection_jacobian(&pose, object, image, k)?;
        }
    }

    let (yaw, pitch, roll) = pose.yaw_pitch_roll();
    Ok(HeadPoseEstimate {
        pose,
        yaw,
        pitch,
        roll,
        rms_error: (cost / object.len() as f64).sqrt(),
        iterations,
        converged,
        accepted_costs,
    })
}

/// Frontal starting pose from the image centroid and spread of the landmarks.
pub fn weak_perspective_start(
    object: &[Vec3],
    image: &[Pixel],
    k: &CameraIntrinsics,
    rotation: Matrix3<f64>,
) -> Option<RigidPose> {
    let n = object.len() as f64;
    let c3 = object.iter().fold(Vec3::ZERO, |a, p| a + *p) / n;
    let (cu, cv) = image
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.u, b + p.v));
    let (cu, cv) = (cu / n, cv / n);
    let rotated: Vec<Vec3> = object
        .iter()
        .map(|p| Vec3::from_na(&(rotation * (*p - c3).to_na())))
        .collect();
    let model_spread = rotated.iter().map(|p| p.x.hypot(p.y)).sum::<f64>() / n;
    let image_spread = image
        .iter()
        .map(|p| ((p.u - cu) / k.fx).hypot((p.v - cv) / k.fy))
        .sum::<f64>()
        / n;
    if !(image_spread > 1e-12 && model_spread > 1e-12) {
        return None;
    }
    let depth = model_spread / image_spread;
    let centre = Vec3::new(
        (cu - k.cx) / k.fx * depth,
        (cv - k.cy) / k.fy * depth,
        depth,
    );
    let offset = Vec3::from_na(&(rotation * c3.to_na()));
    Some(RigidPose::new(rotation, centre - offset))
}

/// DLT initialization followed by LM refinement.
///
/// Six noisy correspondences leave the linear solve with a single redundant
/// equation, so its pose can be far off or even place points behind the
/// camera. A frontal weak-perspective start (and the DLT rotation with a
/// weak-perspective translation) are refined as well; the converged result
/// with the lowest reprojection error wins.
pub fn estimate_head_pose(
    landmarks: &LandmarkSet2D,
    model: &FaceModel,
    k: &CameraIntrinsics,
    settings: &LmSettings,
) -> Result<HeadPoseEstimate, HeadPoseError> {
    let object = model.to_array();
    let image = landmarks.points.to_array();
    let dlt_pose = dlt(&object, &image, k)?;
    let mut starts = vec![dlt_pose];
    starts.extend(weak_perspective_start(
        &object,
        &image,
        k,
        dlt_pose.rotation,
    ));
    starts.extend(weak_perspective_start(
        &object,
        &image,
        k,
        Matrix3::identity(),
    ));

    let mut best: Option<HeadPoseEstimate> = None;
    let mut first_err = None;
    for start in &starts {
        match refine_correspondences(start, &object, &image, k, settings) {
            Ok(est) => {
                let better = best.as_ref().is_none_or(|b| {
                    (est.converged && !b.converged)
                        || (est.converged == b.converged && est.rms_error < b.rms_error)
                });
                if better {
                    best = Some(est);
                }
                // A noise-free fit cannot be improved on.
                if best
                    .as_ref()
                    .is_some_and(|b| b.converged && b.rms_error < 1e-9)
                {
                    break;
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start was tried"))
}

/// Eye aspect ratio: lid separation relative to eye width.
pub fn eye_aspect_ratio(eye: &EyeLandmarks) -> Result<f64, HeadPoseError> {
    let [p1, p2, p3, p4, p5, p6] = eye.points;
    let width = p1.distance(&p4);
    if !(width > 1e-6) {
        return Err(HeadPoseError::DegenerateEye(width));
    }
    Ok((p2.distance(&p6) + p3.distance(&p5)) / (2.0 * width))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionDirection {
    FacingRobotEyesOpen,
    FacingRobotEyesClosed,
    FacingAway,
}

impl AttentionDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            AttentionDirection::FacingRobotEyesOpen => "facing_robot_eyes_open",
            AttentionDirection::FacingRobotEyesClosed => "facing_robot_eyes_closed",
            AttentionDirection::FacingAway => "facing_away",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionThresholds {
    /// Largest |yaw| (rad) still counted as facing the robot.
    pub max_yaw: f64,
    /// Largest |pitch| (rad) still counted as facing the robot.
    pub max_pitch: f64,
    /// Mean eye aspect ratio at or above which the eyes are open.
    pub min_ear: f64,
}

impl Default for AttentionThresholds {
    fn default() -> Self {
        Self {
            max_yaw: 30f64.to_radians(),
            max_pitch: 20f64.to_radians(),
            min_ear: 0.2,
        }
    }
}

/// Labels where the person is looking and whether their eyes are open.
/// Identity head rotation means facing the camera; an estimate that did not
/// converge is labelled as facing away.
pub fn classify_attention_direction(
    est: &HeadPoseEstimate,
    ear_left: f64,
    ear_right: f64,
    thresholds: &AttentionThresholds,
) -> AttentionDirection {
    let facing = est.converged
        && est.yaw.abs() <= thresholds.max_yaw
        && est.pitch.abs() <= thresholds.max_pitch;
    if !facing {
        AttentionDirection::FacingAway
    } else if (ear_left + ear_right) / 2.0 >= thresholds.min_ear {
        AttentionDirection::FacingRobotEyesOpen
    } else {
        AttentionDirection::FacingRobotEyesClosed
    }
}
