//! HTTP front end and process wiring for the detection engine.

pub mod api;
pub mod app;
pub mod feedback;

pub use app::{BackgroundServer, Running, ServerError};
