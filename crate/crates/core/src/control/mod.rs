//! Gesture → command → speed → minimum-jerk segment.

mod command;
mod config;
mod grid;
mod planner;
mod trajectory;

pub use command::{map_gesture_to_command, CommandKind, GestureCommand, GestureMapping};
pub use config::ControlConfig;
pub use grid::{
    select_speed, select_speed_proximity, select_with_policy, ActionGrid, GridCell, SpeedPolicy, SpeedSelection,
};
pub use planner::{plan_segment, wrap_angle, FlightParams, PlannedSegment, Pose};
pub use trajectory::{
    min_jerk_position, min_jerk_scalar, min_jerk_scalar_velocity, min_jerk_velocity, sample_setpoints, sample_times,
    Setpoint, TrajectorySegment,
};
