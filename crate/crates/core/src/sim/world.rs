use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::wrap_angle;
use crate::error::{Error, Result};
use crate::estimation::{process_model_f, Control, Measurement, StateVec, YAW};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// per-tick velocity disturbance, m/s
    pub actuation_sigma: f64,
    pub imu_v_sigma: f64,
    pub imu_yaw_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            actuation_sigma: 0.05,
            imu_v_sigma: 0.1,
            imu_yaw_sigma: 0.01,
        }
    }
}

impl NoiseConfig {
    pub const ZERO: NoiseConfig = NoiseConfig {
        actuation_sigma: 0.0,
        imu_v_sigma: 0.0,
        imu_yaw_sigma: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (f, v) in [
            ("noise.actuation_sigma", self.actuation_sigma),
            ("noise.imu_v_sigma", self.imu_v_sigma),
            ("noise.imu_yaw_sigma", self.imu_yaw_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(f, format!("must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("validated sigma")
}

/// Ground-truth drone. The dynamics are the estimator's process model plus
/// actuation noise; on the ground the drone is pinned at rest.
#[derive(Debug, Clone)]
pub struct SimWorld {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub yaw: f64,
    pub airborne: bool,
    pub t: f64,
    pub alpha: f64,
    pub noise: NoiseConfig,
    plant_rng: ChaCha8Rng,
    imu_rng: ChaCha8Rng,
}

impl SimWorld {
    pub fn new(seed: u64, noise: NoiseConfig, alpha: f64) -> Result<Self> {
        noise.validate()?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("alpha", "must be positive"));
        }
        let mut plant_rng = ChaCha8Rng::seed_from_u64(seed);
        plant_rng.set_stream(1);
        let mut imu_rng = ChaCha8Rng::seed_from_u64(seed);
        imu_rng.set_stream(2);
        Ok(SimWorld {
            position: [0.0; 3],
            velocity: [0.0; 3],
            yaw: 0.0,
            airborne: false,
            t: 0.0,
            alpha,
            noise,
            plant_rng,
            imu_rng,
        })
    }

    pub fn state(&self) -> StateVec {
        let [px, py, pz] = self.position;
        let [vx, vy, vz] = self.velocity;
        StateVec::from([px, py, pz, vx, vy, vz, self.yaw])
    }

    pub fn take_off(&mut self) {
        self.airborne = true;
    }

    /// Ground contact: altitude and velocity snap to zero.
    pub fn touch_down(&mut self) {
        self.airborne = false;
        self.position[2] = 0.0;
        self.velocity = [0.0; 3];
    }

    /// Advance one tick under command `u` (`[v*_body, ψ̇*]`).
    pub fn step_plant(&mut self, u: &Control, dt: f64) -> Result<()> {
        if !self.airborne {
            if u.iter().any(|&v| v != 0.0) {
                return Err(Error::FlightState("motion command while landed".into()));
            }
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
            }
            self.t += dt;
            return Ok(());
        }
        let (x, _) = process_model_f(&self.state(), u, dt, self.alpha)?;
        let n = normal(self.noise.actuation_sigma);
        for a in 0..3 {
            self.position[a] = x[a];
            self.velocity[a] = x[3 + a] + n.sample(&mut self.plant_rng);
        }
        self.yaw = x[YAW];
        if self.position[2] < 0.0 {
            self.position[2] = 0.0;
            self.velocity[2] = self.velocity[2].max(0.0);
        }
        self.t += dt;
        Ok(())
    }

    /// World-frame velocity and yaw with sensor noise.
    pub fn read_imu(&mut self) -> Measurement {
        let nv = normal(self.noise.imu_v_sigma);
        let ny = normal(self.noise.imu_yaw_sigma);
        let v: [f64; 3] = std::array::from_fn(|a| self.velocity[a] + nv.sample(&mut self.imu_rng));
        let yaw = wrap_angle(self.yaw + ny.sample(&mut self.imu_rng));
        Measurement::new(v[0], v[1], v[2], yaw)
    }
}
