use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::command::CommandKind;
use super::trajectory::{min_jerk_scalar, min_jerk_scalar_velocity, TrajectorySegment};

/// Wrap an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlightParams {
    /// metres per translation command
    pub step_length: f64,
    /// m/s per unit of grid speed
    pub v_unit: f64,
    pub hover_altitude: f64,
    pub yaw_step_deg: f64,
    /// `down` never goes below this
    pub min_altitude: f64,
}

impl Default for FlightParams {
    fn default() -> Self {
        FlightParams {
            step_length: 1.0,
            v_unit: 0.25,
            hover_altitude: 1.5,
            yaw_step_deg: 90.0,
            min_altitude: 0.3,
        }
    }
}

impl FlightParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("flight.step_length", self.step_length),
            ("flight.v_unit", self.v_unit),
            ("flight.hover_altitude", self.hover_altitude),
            ("flight.yaw_step_deg", self.yaw_step_deg),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.min_altitude >= 0.0 && self.min_altitude < self.hover_altitude) {
            return Err(Error::invalid("flight.min_altitude", "must lie in [0, hover_altitude)"));
        }
        Ok(())
    }

    pub fn duration(&self, speed: f64) -> f64 {
        self.step_length / (speed * self.v_unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    pub yaw: f64,
}

impl Pose {
    pub const ORIGIN: Pose = Pose {
        position: [0.0; 3],
        yaw: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedSegment {
    pub kind: CommandKind,
    pub speed: f64,
    pub segment: TrajectorySegment,
    pub yaw_start: f64,
    /// zero unless `kind` is a yaw command
    pub yaw_delta: f64,
    pub airborne_after: bool,
}

impl PlannedSegment {
    pub fn yaw_at(&self, t: f64) -> Result<f64> {
        let y = min_jerk_scalar(self.yaw_start, self.yaw_start + self.yaw_delta, self.segment.d, t)?;
        Ok(wrap_angle(y))
    }

    pub fn yaw_rate_at(&self, t: f64) -> Result<f64> {
        min_jerk_scalar_velocity(self.yaw_start, self.yaw_start + self.yaw_delta, self.segment.d, t)
    }

    pub fn end_pose(&self) -> Pose {
        Pose {
            position: self.segment.x_f,
            yaw: wrap_angle(self.yaw_start + self.yaw_delta),
        }
    }
}

/// Turn one command into a rest-to-rest segment starting at `current`.
/// Directions are body-frame: forward is along the current yaw, left is
/// a quarter turn counter-clockwise from it.
pub fn plan_segment(
    current: Pose,
    airborne: bool,
    kind: CommandKind,
    speed: f64,
    params: &FlightParams,
) -> Result<PlannedSegment> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::invalid("speed", format!("must be positive, got {speed}")));
    }
    if current.position.iter().any(|v| !v.is_finite()) || !current.yaw.is_finite() {
        return Err(Error::NonFinite("current pose".into()));
    }
    match (kind, airborne) {
        (CommandKind::Takeoff, true) => return Err(Error::FlightState("takeoff while airborne".into())),
        (CommandKind::Takeoff, false) => {}
        (k, false) => return Err(Error::FlightState(format!("{k} while landed"))),
        _ => {}
    }
    let [x, y, z] = current.position;
    let (c, s) = (current.yaw.cos(), current.yaw.sin());
    let step = params.step_length;
    let planar = |fx: f64, fy: f64| [x + step * fx, y + step * fy, z];
    let mut yaw_delta = 0.0;
    let x_f = match kind {
        CommandKind::Takeoff => [x, y, params.hover_altitude],
        CommandKind::Land => [x, y, 0.0],
        CommandKind::Up => [x, y, z + step],
        CommandKind::Down => [x, y, (z - step).max(params.min_altitude.min(z))],
        CommandKind::Forward => planar(c, s),
        CommandKind::Backward => planar(-c, -s),
        CommandKind::Left => planar(-s, c),
        CommandKind::Right => planar(s, -c),
        CommandKind::YawLeft => {
            yaw_delta = params.yaw_step_deg.to_radians();
            current.position
        }
        CommandKind::YawRight => {
            yaw_delta = -params.yaw_step_deg.to_radians();
            current.position
        }
    };
    Ok(PlannedSegment {
        kind,
        speed,
        segment: TrajectorySegment::new(current.position, x_f, params.duration(speed))?,
        yaw_start: current.yaw,
        yaw_delta,
        airborne_after: kind != CommandKind::Land,
    })
}
