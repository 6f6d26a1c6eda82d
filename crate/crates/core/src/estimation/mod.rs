//! Extended Kalman filter over `[px, py, pz, vx, vy, vz, ψ]`.
//!
//! Process model: the drone is commanded with a body-frame velocity and a
//! yaw rate and reaches the commanded velocity with a first-order lag of
//! rate `α`. The IMU reports world-frame velocity and yaw.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::control::wrap_angle;
use crate::error::{Error, Result};

pub type StateVec = SVector<f64, 7>;
pub type StateCov = SMatrix<f64, 7, 7>;
pub type Measurement = SVector<f64, 4>;
pub type MeasCov = SMatrix<f64, 4, 4>;
/// `[v*_body x, y, z, ψ̇*]`
pub type Control = SVector<f64, 4>;
pub type MeasJacobian = SMatrix<f64, 4, 7>;

pub const YAW: usize = 6;
pub const DEFAULT_ALPHA: f64 = 2.0;
/// innovation covariances worse conditioned than this are refused
pub const MAX_CONDITION: f64 = 1e12;

fn finite<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

pub fn process_model_f(x: &StateVec, u: &Control, dt: f64, alpha: f64) -> Result<(StateVec, StateCov)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    finite(x, "state")?;
    finite(u, "control")?;
    let psi = x[YAW];
    let (s, c) = psi.sin_cos();
    let (ux, uy, uz) = (u[0], u[1], u[2]);
    let w = [c * ux - s * uy, s * ux + c * uy, uz];
    let k = alpha * dt;

    let mut xn = *x;
    for a in 0..3 {
        xn[a] = x[a] + x[3 + a] * dt;
        xn[3 + a] = x[3 + a] + k * (w[a] - x[3 + a]);
    }
    xn[YAW] = wrap_angle(psi + u[3] * dt);

    let mut f = StateCov::identity();
    for a in 0..3 {
        f[(a, 3 + a)] = dt;
        f[(3 + a, 3 + a)] = 1.0 - k;
    }
    f[(3, YAW)] = k * (-s * ux - c * uy);
    f[(4, YAW)] = k * (c * ux - s * uy);
    Ok((xn, f))
}

pub fn measurement_matrix() -> MeasJacobian {
    let mut h = MeasJacobian::zeros();
    for r in 0..3 {
        h[(r, 3 + r)] = 1.0;
    }
    h[(3, YAW)] = 1.0;
    h
}

pub fn measurement_model_h(x: &StateVec) -> (Measurement, MeasJacobian) {
    (Measurement::new(x[3], x[4], x[5], x[YAW]), measurement_matrix())
}

pub fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

pub fn min_eigenvalue(p: &StateCov) -> f64 {
    symmetrize(p).symmetric_eigenvalues().min()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfBelief {
    pub x_hat: StateVec,
    pub p: StateCov,
}

impl EkfBelief {
    pub fn new(x_hat: StateVec, p: StateCov) -> Result<Self> {
        finite(&x_hat, "belief state")?;
        finite(&p, "belief covariance")?;
        Ok(EkfBelief {
            x_hat,
            p: symmetrize(&p),
        })
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x_hat[0], self.x_hat[1], self.x_hat[2]]
    }

    pub fn velocity(&self) -> [f64; 3] {
        [self.x_hat[3], self.x_hat[4], self.x_hat[5]]
    }

    pub fn yaw(&self) -> f64 {
        self.x_hat[YAW]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub q: StateCov,
    pub r: MeasCov,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutput {
    pub belief: EkfBelief,
    pub residual: Measurement,
    pub gain: SMatrix<f64, 7, 4>,
}

pub fn ekf_predict(b: &EkfBelief, u: &Control, dt: f64, alpha: f64, q: &StateCov) -> Result<EkfBelief> {
    let (x, f) = process_model_f(&b.x_hat, u, dt, alpha)?;
    let p = f * b.p * f.transpose() + q;
    finite(&p, "predicted covariance")?;
    Ok(EkfBelief {
        x_hat: x,
        p: symmetrize(&p),
    })
}

pub fn ekf_update(b: &EkfBelief, z: &Measurement, r: &MeasCov) -> Result<UpdateOutput> {
    finite(z, "measurement")?;
    let (z_pred, h) = measurement_model_h(&b.x_hat);
    let mut residual = z - z_pred;
    residual[3] = wrap_angle(residual[3]);

    let s = r + h * b.p * h.transpose();
    let sv = s.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition.is_finite() && condition <= MAX_CONDITION) {
        return Err(Error::SingularInnovation { condition });
    }
    let s_inv = s.try_inverse().ok_or(Error::SingularInnovation { condition })?;
    let gain = b.p * h.transpose() * s_inv;
    let mut x = b.x_hat + gain * residual;
    x[YAW] = wrap_angle(x[YAW]);
    let p = (StateCov::identity() - gain * h) * b.p;
    Ok(UpdateOutput {
        belief: EkfBelief {
            x_hat: x,
            p: symmetrize(&p),
        },
        residual,
        gain,
    })
}

/// Tuning constants, diagonal only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EkfConfig {
    pub alpha: f64,
    pub q_diag: [f64; 7],
    pub r_diag: [f64; 4],
    pub p0_diag: [f64; 7],
}

impl Default for EkfConfig {
    fn default() -> Self {
        EkfConfig {
            alpha: DEFAULT_ALPHA,
            // velocity term matches the plant's actuation noise (0.05 m/s per tick)
            q_diag: [1e-6, 1e-6, 1e-6, 2.5e-3, 2.5e-3, 2.5e-3, 1e-6],
            r_diag: [0.01, 0.01, 0.01, 0.001],
            p0_diag: [1e-4; 7],
        }
    }
}

impl EkfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid("ekf.alpha", "must be positive"));
        }
        let groups: [(&str, &[f64]); 3] = [
            ("ekf.q_diag", &self.q_diag),
            ("ekf.r_diag", &self.r_diag),
            ("ekf.p0_diag", &self.p0_diag),
        ];
        for (field, vals) in groups {
            if let Some(i) = vals.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid(
                    format!("{field}[{i}]"),
                    "must be finite and non-negative",
                ));
            }
        }
        if self.r_diag.contains(&0.0) {
            return Err(Error::invalid("ekf.r_diag", "measurement noise must be positive"));
        }
        Ok(())
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            q: StateCov::from_diagonal(&StateVec::from(self.q_diag)),
            r: MeasCov::from_diagonal(&Measurement::from(self.r_diag)),
        }
    }

    pub fn initial_belief(&self, x0: StateVec) -> Result<EkfBelief> {
        EkfBelief::new(x0, StateCov::from_diagonal(&StateVec::from(self.p0_diag)))
    }
}
