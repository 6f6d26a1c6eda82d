//! Tick-by-tick closed loop: gesture → segment → controller → plant → IMU → EKF.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{
    map_gesture_to_command, plan_segment, select_with_policy, wrap_angle, CommandKind, PlannedSegment, Pose,
    SpeedSelection,
};
use crate::data::Quartile;
use crate::error::{Error, Result};
use crate::estimation::{ekf_predict, ekf_update, Control, EkfBelief, NoiseModel, StateVec};

use super::log::{FlightLog, LogRow, RowStatus};
use super::pipeline::PipelineConfig;
use super::world::SimWorld;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    BelowThreshold { confidence: f64, threshold: f64 },
    Unmapped { class_id: usize },
    InvalidState { message: String },
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::BelowThreshold { confidence, threshold } => {
                write!(f, "below-threshold: confidence {confidence} < {threshold}")
            }
            Rejection::Unmapped { class_id } => write!(f, "unmapped: class {class_id}"),
            Rejection::InvalidState { message } => write!(f, "invalid-state: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum GestureOutcome {
    Accepted {
        class_id: usize,
        command: CommandKind,
        confidence: f64,
        quartile: Quartile,
        speed: f64,
        cell: [usize; 2],
        duration: f64,
    },
    Rejected {
        class_id: usize,
        confidence: f64,
        rejection: Rejection,
    },
}

impl GestureOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, GestureOutcome::Accepted { .. })
    }
}

#[derive(Debug, Clone)]
enum Activity {
    Idle,
    Segment {
        plan: PlannedSegment,
        confidence: f64,
        cell: [usize; 2],
        quartile: Quartile,
        ticks_done: usize,
        move_ticks: usize,
    },
    Refused {
        remaining: usize,
        command: Option<CommandKind>,
        confidence: f64,
    },
}

/// What one tick produced, with the live segment context for streaming.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickInfo {
    /// 1-based tick counter
    pub tick: u64,
    pub row: LogRow,
    /// fraction of the active segment completed, if one is active
    pub progress: Option<f64>,
    pub cell: Option<[usize; 2]>,
    pub quartile: Option<Quartile>,
}

/// One drone, its estimator and its flight log. Gestures are only accepted
/// while idle; a segment always runs to completion.
#[derive(Debug, Clone)]
pub struct FlightLoop {
    cfg: PipelineConfig,
    noise: NoiseModel,
    pub world: SimWorld,
    pub belief: EkfBelief,
    /// where the reference path currently ends
    pub planned: Pose,
    pub tick: u64,
    pub log: FlightLog,
    activity: Activity,
    select_rng: ChaCha8Rng,
}

impl FlightLoop {
    pub fn new(cfg: &PipelineConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let world = SimWorld::new(seed, cfg.noise, cfg.ekf.alpha)?;
        let belief = cfg.ekf.initial_belief(StateVec::zeros())?;
        let mut select_rng = ChaCha8Rng::seed_from_u64(seed);
        select_rng.set_stream(3);
        Ok(FlightLoop {
            cfg: cfg.clone(),
            noise: cfg.ekf.noise(),
            world,
            belief,
            planned: Pose::ORIGIN,
            tick: 0,
            log: FlightLog::new(),
            activity: Activity::Idle,
            select_rng,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn is_idle(&self) -> bool {
        matches!(self.activity, Activity::Idle)
    }

    pub fn active_segment(&self) -> Option<&PlannedSegment> {
        match &self.activity {
            Activity::Segment { plan, .. } => Some(plan),
            _ => None,
        }
    }

    /// Gate, map and plan one classified gesture. Refusals are values and
    /// schedule a short hover that is logged as `rejected`.
    pub fn submit(&mut self, class_id: usize, confidence: f64, quartile: Quartile) -> Result<GestureOutcome> {
        if !self.is_idle() {
            return Err(Error::FlightState("a segment is still active".into()));
        }
        let command = map_gesture_to_command(class_id, &self.cfg.control.mapping)
            .ok()
            .map(|c| c.kind);
        let ctl = &self.cfg.control;
        let sel = select_with_policy(ctl.policy, &ctl.grid, quartile, confidence, &mut self.select_rng)?;
        let rejection = match (command, sel) {
            (_, SpeedSelection::Rejected { confidence, threshold }) => {
                Rejection::BelowThreshold { confidence, threshold }
            }
            (None, _) => Rejection::Unmapped { class_id },
            (Some(kind), SpeedSelection::Selected { speed, row, col, .. }) => {
                match plan_segment(self.planned, self.world.airborne, kind, speed, &ctl.flight) {
                    Ok(plan) => {
                        if kind == CommandKind::Takeoff {
                            self.world.take_off();
                        }
                        let move_ticks = ((plan.segment.d / self.cfg.dt) - 1e-9).ceil().max(1.0) as usize;
                        self.activity = Activity::Segment {
                            plan,
                            confidence,
                            cell: [row, col],
                            quartile,
                            ticks_done: 0,
                            move_ticks,
                        };
                        return Ok(GestureOutcome::Accepted {
                            class_id,
                            command: kind,
                            confidence,
                            quartile,
                            speed,
                            cell: [row, col],
                            duration: plan.segment.d,
                        });
                    }
                    Err(Error::FlightState(message)) => Rejection::InvalidState { message },
                    Err(e) => return Err(e),
                }
            }
        };
        self.activity = Activity::Refused {
            remaining: self.cfg.reject_hold_ticks,
            command,
            confidence,
        };
        Ok(GestureOutcome::Rejected {
            class_id,
            confidence,
            rejection,
        })
    }

    /// Reference position/velocity/yaw `ticks_ahead` ticks from now.
    fn reference(&self, ticks_ahead: usize) -> Result<([f64; 3], [f64; 3], f64)> {
        match &self.activity {
            Activity::Segment {
                plan,
                ticks_done,
                move_ticks,
                ..
            } => {
                let j = ticks_done + ticks_ahead;
                if j >= *move_ticks {
                    let end = plan.end_pose();
                    return Ok((end.position, [0.0; 3], end.yaw));
                }
                let tau = (j as f64 * self.cfg.dt).min(plan.segment.d);
                Ok((
                    crate::control::min_jerk_position(&plan.segment, tau)?,
                    crate::control::min_jerk_velocity(&plan.segment, tau)?,
                    plan.yaw_at(tau)?,
                ))
            }
            _ => Ok((self.planned.position, [0.0; 3], self.planned.yaw)),
        }
    }

    /// Two-tick deadbeat law on the estimate: pick the commanded velocity so
    /// the predicted position two ticks out lands on the reference.
    fn control(&self) -> Result<Control> {
        if !self.world.airborne {
            return Ok(Control::zeros());
        }
        let dt = self.cfg.dt;
        let k = self.cfg.ekf.alpha * dt;
        let (target, _, _) = self.reference(2)?;
        let (_, _, yaw_next) = self.reference(1)?;
        let p = self.belief.position();
        let v = self.belief.velocity();
        let psi = self.belief.yaw();
        let w: [f64; 3] = std::array::from_fn(|a| {
            let v_next = (target[a] - p[a] - v[a] * dt) / dt;
            v[a] + (v_next - v[a]) / k
        });
        let (s, c) = psi.sin_cos();
        Ok(Control::new(
            c * w[0] + s * w[1],
            -s * w[0] + c * w[1],
            w[2],
            wrap_angle(yaw_next - psi) / dt,
        ))
    }

    /// Advance one control tick and append its log row.
    pub fn step(&mut self) -> Result<TickInfo> {
        let dt = self.cfg.dt;
        let u = self.control()?;
        self.world.step_plant(&u, dt)?;
        let z = self.world.read_imu();
        let predicted = ekf_predict(&self.belief, &u, dt, self.cfg.ekf.alpha, &self.noise.q)?;
        self.belief = ekf_update(&predicted, &z, &self.noise.r)?.belief;
        self.tick += 1;

        let (sp_p, sp_v, _) = self.reference(1)?;
        let (command, speed, confidence, status, progress, cell, quartile) = match &mut self.activity {
            Activity::Idle => (None, 0.0, 0.0, RowStatus::Hover, None, None, None),
            Activity::Segment {
                plan,
                confidence,
                cell,
                quartile,
                ticks_done,
                move_ticks,
            } => {
                *ticks_done += 1;
                let progress = (*ticks_done as f64 / *move_ticks as f64).min(1.0);
                (
                    Some(plan.kind),
                    plan.speed,
                    *confidence,
                    RowStatus::Active,
                    Some(progress),
                    Some(*cell),
                    Some(*quartile),
                )
            }
            Activity::Refused {
                remaining,
                command,
                confidence,
            } => {
                *remaining = remaining.saturating_sub(1);
                (*command, 0.0, *confidence, RowStatus::Rejected, None, None, None)
            }
        };
        self.finish_activity();

        let row = LogRow {
            t: self.world.t,
            setpoint_p: sp_p,
            setpoint_v: sp_v,
            true_p: self.world.position,
            true_v: self.world.velocity,
            true_yaw: self.world.yaw,
            est_p: self.belief.position(),
            est_v: self.belief.velocity(),
            est_yaw: self.belief.yaw(),
            command,
            speed,
            confidence,
            airborne: self.world.airborne,
            status,
        };
        self.log.push(row);
        Ok(TickInfo {
            tick: self.tick,
            row,
            progress,
            cell,
            quartile,
        })
    }

    fn finish_activity(&mut self) {
        let done = match &self.activity {
            Activity::Idle => false,
            Activity::Segment {
                ticks_done, move_ticks, ..
            } => *ticks_done >= move_ticks + self.cfg.hold_ticks,
            Activity::Refused { remaining, .. } => *remaining == 0,
        };
        if !done {
            return;
        }
        if let Activity::Segment { plan, .. } = &self.activity {
            self.planned = plan.end_pose();
            if !plan.airborne_after {
                self.world.touch_down();
            }
        }
        self.activity = Activity::Idle;
    }

    /// Step until idle; returns the ticks taken.
    pub fn run_until_idle(&mut self, mut on_tick: impl FnMut(&TickInfo)) -> Result<usize> {
        let mut n = 0;
        while !self.is_idle() {
            let info = self.step()?;
            on_tick(&info);
            n += 1;
        }
        Ok(n)
    }
}
