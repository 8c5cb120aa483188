//! HTTP service and command-line entry points for App Planner.

pub mod api;
pub mod cli;
pub mod error;
pub mod service;

pub use api::{router, AppState};
pub use error::ApiError;
pub use service::{Planner, PlannerOptions, ServiceError};
