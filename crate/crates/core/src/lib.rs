//! Gesture-to-flight pipeline for a simulated micro-drone.
//!
//! * [`ops`], [`tensor`], [`cost`]: convolution kernels and op accounting
//! * [`gabor`], [`cbam`], [`model`]: the G-MobNet classifier
//! * [`data`]: synthetic gesture frames, PGM I/O, template classifier
//! * [`control`]: action space, minimum-jerk trajectories, segment planning
//! * [`estimation`]: EKF pose/velocity estimation
//! * [`sim`]: drone plant, missions, flight logs, tracking metrics

// `!(x >= lo)` style range checks are there to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cbam;
pub mod control;
pub mod cost;
pub mod data;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod gabor;
pub mod model;
pub mod ops;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Exec;
pub use tensor::Tensor;
