//! Constant-velocity Kalman filter over `(cx, cy, s, r)` box measurements.
//!
//! State layout is `[cx, cy, s, r, vcx, vcy, vs]`: box centre, area, aspect
//! ratio (w/h) and velocities of the first three. The aspect ratio has no
//! velocity term.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::model::BBox;

pub type StateVector = SVector<f64, 7>;
pub type StateCovariance = SMatrix<f64, 7, 7>;
type Measurement = SVector<f64, 4>;
type MeasurementMatrix = SMatrix<f64, 4, 7>;

/// Noise magnitudes for the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanParams {
    /// Pixel-scale measurement noise; R = diag(1, 1, 10, 10)·σ².
    pub measurement_sigma: f64,
    pub process_position: f64,
    pub process_velocity: f64,
    pub process_scale_velocity: f64,
    pub initial_position_var: f64,
    pub initial_velocity_var: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        KalmanParams {
            measurement_sigma: 1.0,
            process_position: 1.0,
            process_velocity: 0.01,
            process_scale_velocity: 1e-4,
            initial_position_var: 10.0,
            initial_velocity_var: 1e3,
        }
    }
}

impl KalmanParams {
    fn transition() -> StateCovariance {
        let mut f = StateCovariance::identity();
        f[(0, 4)] = 1.0;
        f[(1, 5)] = 1.0;
        f[(2, 6)] = 1.0;
        f
    }

    fn observation() -> MeasurementMatrix {
        let mut h = MeasurementMatrix::zeros();
        for i in 0..4 {
            h[(i, i)] = 1.0;
        }
        h
    }

    fn process_noise(&self) -> StateCovariance {
        let p = self.process_position;
        let v = self.process_velocity;
        StateCovariance::from_diagonal(&StateVector::from_column_slice(&[
            p,
            p,
            p,
            p,
            v,
            v,
            self.process_scale_velocity,
        ]))
    }

    fn measurement_noise(&self) -> SMatrix<f64, 4, 4> {
        let s2 = self.measurement_sigma * self.measurement_sigma;
        SMatrix::<f64, 4, 4>::from_diagonal(&Measurement::new(s2, s2, 10.0 * s2, 10.0 * s2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

pub fn bbox_to_measurement(b: &BBox) -> [f64; 4] {
    let (cx, cy) = b.center();
    [cx, cy, b.w * b.h, b.w / b.h]
}

/// Inverse of [`bbox_to_measurement`]; `None` when scale or ratio are not
/// positive.
pub fn measurement_to_bbox(cx: f64, cy: f64, s: f64, r: f64) -> Option<BBox> {
    if !(s > 0.0 && r > 0.0) {
        return None;
    }
    let w = (s * r).sqrt();
    let h = s / w;
    BBox::new(cx - w / 2.0, cy - h / 2.0, w, h).ok()
}

impl KalmanState {
    pub fn from_bbox(b: &BBox, params: &KalmanParams) -> Self {
        let [cx, cy, s, r] = bbox_to_measurement(b);
        let mean = StateVector::from_column_slice(&[cx, cy, s, r, 0.0, 0.0, 0.0]);
        let mut diag = [params.initial_position_var; 7];
        for d in &mut diag[4..] {
            *d = params.initial_velocity_var;
        }
        KalmanState {
            mean,
            covariance: StateCovariance::from_diagonal(&StateVector::from_column_slice(&diag)),
        }
    }

    /// Current box estimate, or `None` if the area has collapsed.
    pub fn bbox(&self) -> Option<BBox> {
        let m = &self.mean;
        measurement_to_bbox(m[0], m[1], m[2], m[3])
    }

    pub fn trace(&self) -> f64 {
        self.covariance.trace()
    }
}

fn symmetrize(p: &StateCovariance) -> StateCovariance {
    (p + p.transpose()) * 0.5
}

pub fn kalman_predict(st: &KalmanState, params: &KalmanParams) -> KalmanState {
    let mut mean = st.mean;
    // keep the area positive: drop a shrink velocity that would overshoot zero
    if mean[2] + mean[6] <= 0.0 {
        mean[6] = 0.0;
    }
    let f = KalmanParams::transition();
    let mean = f * mean;
    let covariance = symmetrize(&(f * st.covariance * f.transpose() + params.process_noise()));
    KalmanState { mean, covariance }
}

/// Measurement update in Joseph form, which keeps the posterior covariance
/// positive semi-definite under rounding.
pub fn kalman_update(st: &KalmanState, z: &BBox, params: &KalmanParams) -> KalmanState {
    let h = KalmanParams::observation();
    let r = params.measurement_noise();
    let z = Measurement::from_column_slice(&bbox_to_measurement(z));
    let innovation = z - h * st.mean;
    let s = h * st.covariance * h.transpose() + r;
    let s_inv = s
        .try_inverse()
        .expect("innovation covariance is positive definite because R is");
    let gain = st.covariance * h.transpose() * s_inv;
    let mean = st.mean + gain * innovation;
    let i_kh = StateCovariance::identity() - gain * h;
    let covariance = symmetrize(&(i_kh * st.covariance * i_kh.transpose() + gain * r * gain.transpose()));
    KalmanState { mean, covariance }
}
