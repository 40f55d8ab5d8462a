//! Constant-velocity Kalman filter over box state `(cx, cy, a, h)` plus
//! per-frame velocities, and camera-motion warps applied to that state.

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::geometry::BBox;

pub type StateVector = SVector<f64, 8>;
pub type StateMatrix = SMatrix<f64, 8, 8>;

const MIN_HEIGHT: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("measurement height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("measurement contains a non-finite component")]
    NonFiniteMeasurement,
    #[error("warp linear part is singular (det = {0})")]
    SingularWarp(f64),
}

/// Filter state: mean `(cx, cy, a, h, v_cx, v_cy, v_a, v_h)` and its
/// 8x8 covariance. `a` is the width/height aspect ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateMatrix,
}

impl KalmanState {
    /// Current state as a box. Aspect and height are floored at zero:
    /// a filter pushed into a degenerate shape yields an empty box that
    /// can never win a match, rather than an invalid one.
    pub fn bbox(&self) -> BBox {
        BBox::from_cxcyah(
            self.mean[0],
            self.mean[1],
            self.mean[2].max(0.0),
            self.mean[3].max(0.0),
        )
    }
}

/// Height-relative noise scales. The defaults are the SORT-family
/// convention: position std 1/20 of box height, velocity std 1/160.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub position_weight: f64,
    pub velocity_weight: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            position_weight: 1.0 / 20.0,
            velocity_weight: 1.0 / 160.0,
        }
    }
}

/// 2x3 affine transform taking previous-frame pixel coordinates to
/// current-frame pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Warp {
    pub coeffs: [[f64; 3]; 2],
}

impl Warp {
    pub fn identity() -> Self {
        Self {
            coeffs: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            coeffs: [[1.0, 0.0, tx], [0.0, 1.0, ty]],
        }
    }

    /// Row-major `[a11, a12, a13, a21, a22, a23]`.
    pub fn from_row_major(c: [f64; 6]) -> Self {
        Self {
            coeffs: [[c[0], c[1], c[2]], [c[3], c[4], c[5]]],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.coeffs == Self::identity().coeffs
    }

    fn linear_det(&self) -> f64 {
        self.coeffs[0][0] * self.coeffs[1][1] - self.coeffs[0][1] * self.coeffs[1][0]
    }
}

fn measurement_vec(z: [f64; 4]) -> SVector<f64, 4> {
    SVector::<f64, 4>::from_column_slice(&z)
}

fn symmetrize(m: &StateMatrix) -> StateMatrix {
    (m + m.transpose()) * 0.5
}

/// New state from a first measurement `(cx, cy, a, h)`: velocities zero,
/// covariance from height-scaled standard deviations.
pub fn kf_initiate(z: [f64; 4]) -> Result<KalmanState, MotionError> {
    kf_initiate_with(z, &NoiseParams::default())
}

pub fn kf_initiate_with(z: [f64; 4], p: &NoiseParams) -> Result<KalmanState, MotionError> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(MotionError::NonFiniteMeasurement);
    }
    let h = z[3];
    if h <= 0.0 {
        return Err(MotionError::NonPositiveHeight(h));
    }
    let mut mean = StateVector::zeros();
    mean.fixed_rows_mut::<4>(0).copy_from(&measurement_vec(z));

    let wp = p.position_weight;
    let wv = p.velocity_weight;
    let std = [
        2.0 * wp * h,
        2.0 * wp * h,
        1e-2,
        2.0 * wp * h,
        10.0 * wv * h,
        10.0 * wv * h,
        1e-5,
        10.0 * wv * h,
    ];
    let mut covariance = StateMatrix::zeros();
    for (i, s) in std.iter().enumerate() {
        covariance[(i, i)] = s * s;
    }
    Ok(KalmanState { mean, covariance })
}

/// One constant-velocity step (dt = 1 frame): positions advance by their
/// velocities, covariance grows by the process noise.
pub fn kf_predict(s: &KalmanState) -> KalmanState {
    kf_predict_with(s, &NoiseParams::default())
}

pub fn kf_predict_with(s: &KalmanState, p: &NoiseParams) -> KalmanState {
    let mut transition = StateMatrix::identity();
    for i in 0..4 {
        transition[(i, i + 4)] = 1.0;
    }
    let h = s.mean[3];
    let wp = p.position_weight;
    let wv = p.velocity_weight;
    let std = [wp * h, wp * h, 1e-2, wp * h, wv * h, wv * h, 1e-5, wv * h];
    let mut process_noise = StateMatrix::zeros();
    for (i, sd) in std.iter().enumerate() {
        process_noise[(i, i)] = sd * sd;
    }

    let mean = transition * s.mean;
    let covariance =
        symmetrize(&(transition * s.covariance * transition.transpose())) + process_noise;
    KalmanState { mean, covariance }
}

/// Standard Kalman correction with measurement model `H = [I4 | 0]`,
/// Joseph-form covariance update. Height is floored at 1e-3 afterwards
/// so the aspect conversion can never degenerate.
pub fn kf_update(s: &KalmanState, z: [f64; 4]) -> Result<KalmanState, MotionError> {
    kf_update_with(s, z, &NoiseParams::default())
}

pub fn kf_update_with(
    s: &KalmanState,
    z: [f64; 4],
    p: &NoiseParams,
) -> Result<KalmanState, MotionError> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(MotionError::NonFiniteMeasurement);
    }
    if z[3] <= 0.0 {
        return Err(MotionError::NonPositiveHeight(z[3]));
    }

    let mut obs = SMatrix::<f64, 4, 8>::zeros();
    for i in 0..4 {
        obs[(i, i)] = 1.0;
    }
    let h = s.mean[3];
    let wp = p.position_weight;
    let std = [wp * h, wp * h, 1e-1, wp * h];
    let mut meas_noise = SMatrix::<f64, 4, 4>::zeros();
    for (i, sd) in std.iter().enumerate() {
        meas_noise[(i, i)] = sd * sd;
    }

    let innovation_cov = obs * s.covariance * obs.transpose() + meas_noise;
    let chol = innovation_cov
        .cholesky()
        .expect("innovation covariance must be positive definite");
    // gain = P H^T S^-1, solved through the Cholesky factor
    let gain = chol.solve(&(obs * s.covariance)).transpose();

    let innovation = measurement_vec(z) - obs * s.mean;
    let mut mean = s.mean + gain * innovation;

    let identity = StateMatrix::identity();
    let shrink = identity - gain * obs;
    let covariance = symmetrize(
        &(shrink * s.covariance * shrink.transpose() + gain * meas_noise * gain.transpose()),
    );

    if !mean[3].is_finite() || mean[3] < MIN_HEIGHT {
        mean[3] = MIN_HEIGHT;
    }
    Ok(KalmanState { mean, covariance })
}

/// Map a state through a camera-motion warp: position by the full
/// affine, velocity by the linear part, height by the y axis scale and
/// aspect by the x/y scale ratio. The covariance is conjugated by the
/// same block transform.
pub fn apply_warp(s: &KalmanState, w: &Warp) -> Result<KalmanState, MotionError> {
    let det = w.linear_det();
    if !det.is_finite() || det.abs() < 1e-12 {
        return Err(MotionError::SingularWarp(det));
    }
    let [[a11, a12, tx], [a21, a22, ty]] = w.coeffs;
    let sx = (a11 * a11 + a21 * a21).sqrt();
    let sy = (a12 * a12 + a22 * a22).sqrt();

    let mut transform = StateMatrix::zeros();
    for base in [0, 4] {
        transform[(base, base)] = a11;
        transform[(base, base + 1)] = a12;
        transform[(base + 1, base)] = a21;
        transform[(base + 1, base + 1)] = a22;
        transform[(base + 2, base + 2)] = sx / sy;
        transform[(base + 3, base + 3)] = sy;
    }

    let mut mean = transform * s.mean;
    mean[0] += tx;
    mean[1] += ty;
    let covariance = symmetrize(&(transform * s.covariance * transform.transpose()));
    Ok(KalmanState { mean, covariance })
}
