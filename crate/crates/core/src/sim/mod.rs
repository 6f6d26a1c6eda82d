//! Simulated drone, closed-loop missions and tracking metrics.

mod flight;
mod log;
mod metrics;
mod mission;
mod pipeline;
mod world;

pub use flight::{FlightLoop, GestureOutcome, Rejection, TickInfo};
pub use log::{FlightLog, LogRow, RowStatus};
pub use metrics::{
    closest_on_polyline, closest_on_segment, track_displacement, track_displacement_points, TrackMetrics,
};
pub use mission::{run_mission, run_missions, Mission, MissionRun};
pub use pipeline::{Classifier, ClassifierSpec, PipelineConfig, ScriptEntry};
pub use world::{NoiseConfig, SimWorld};
