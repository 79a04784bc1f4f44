//! Command-line and HTTP front ends over the facilitation engine.

pub mod api;
pub mod cli;
mod error;

pub use error::AppError;
