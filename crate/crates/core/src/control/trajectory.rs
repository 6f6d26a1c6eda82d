//! Rest-to-rest quintic (minimum-jerk) segments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub x_i: [f64; 3],
    pub x_f: [f64; 3],
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoint {
    pub t: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

impl TrajectorySegment {
    pub fn new(x_i: [f64; 3], x_f: [f64; 3], d: f64) -> Result<Self> {
        let seg = TrajectorySegment { x_i, x_f, d };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d.is_finite() && self.d > 0.0) {
            return Err(Error::invalid(
                "d",
                format!("duration must be positive, got {}", self.d),
            ));
        }
        if self.x_i.iter().chain(&self.x_f).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("segment endpoints".into()));
        }
        Ok(())
    }

    pub fn displacement(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.x_f[a] - self.x_i[a])
    }
}

fn phase(d: f64, t: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid("d", format!("duration must be positive, got {d}")));
    }
    if !(0.0..=d).contains(&t) {
        return Err(Error::invalid("t", format!("{t} outside [0, {d}]")));
    }
    Ok(t / d)
}

// 10s³ − 15s⁴ + 6s⁵; exactly 0 at s = 0 and 1 at s = 1
fn blend(s: f64) -> f64 {
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

// 30s² − 60s³ + 30s⁴ = 30 s² (1 − s)²
fn blend_rate(s: f64) -> f64 {
    let r = s * (1.0 - s);
    30.0 * r * r
}

/// Scalar position; written as a weighted mean so both endpoints are hit exactly.
pub fn min_jerk_scalar(x_i: f64, x_f: f64, d: f64, t: f64) -> Result<f64> {
    let b = blend(phase(d, t)?);
    Ok((1.0 - b) * x_i + b * x_f)
}

pub fn min_jerk_scalar_velocity(x_i: f64, x_f: f64, d: f64, t: f64) -> Result<f64> {
    let s = phase(d, t)?;
    Ok((x_f - x_i) * blend_rate(s) / d)
}

pub fn min_jerk_position(seg: &TrajectorySegment, t: f64) -> Result<[f64; 3]> {
    seg.validate()?;
    let b = blend(phase(seg.d, t)?);
    Ok(std::array::from_fn(|a| (1.0 - b) * seg.x_i[a] + b * seg.x_f[a]))
}

pub fn min_jerk_velocity(seg: &TrajectorySegment, t: f64) -> Result<[f64; 3]> {
    seg.validate()?;
    let r = blend_rate(phase(seg.d, t)?);
    Ok(std::array::from_fn(|a| (seg.x_f[a] - seg.x_i[a]) * r / seg.d))
}

/// Sample times `0, dt, 2dt, …` plus `d` itself. A regular sample closer
/// than `1e-9·d` to the end is merged into the final one.
pub fn sample_times(d: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid("d", format!("duration must be positive, got {d}")));
    }
    if dt > d {
        return Err(Error::invalid("dt", format!("{dt} exceeds segment duration {d}")));
    }
    let mut ts = Vec::with_capacity((d / dt) as usize + 2);
    let mut k = 0u64;
    loop {
        let t = k as f64 * dt;
        if t >= d - 1e-9 * d {
            break;
        }
        ts.push(t);
        k += 1;
    }
    ts.push(d);
    Ok(ts)
}

pub fn sample_setpoints(seg: &TrajectorySegment, dt: f64) -> Result<Vec<Setpoint>> {
    seg.validate()?;
    sample_times(seg.d, dt)?
        .into_iter()
        .map(|t| {
            Ok(Setpoint {
                t,
                position: min_jerk_position(seg, t)?,
                velocity: min_jerk_velocity(seg, t)?,
            })
        })
        .collect()
}
