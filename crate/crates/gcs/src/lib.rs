//! Ground-control service for the simulated drone: live sessions over
//! HTTP + websocket, mission runs, log persistence and replay, and the
//! `gmob` command line.

pub mod cli;
pub mod error;
pub mod protocol;
pub mod server;
pub mod session;

pub use error::ServiceError;
pub use server::{router, serve, AppState, ServiceConfig};
pub use session::{Session, StreamCursor, StreamOptions};
