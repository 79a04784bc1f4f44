//! Discussion-facilitation engine: hypergraph targeting of forum activity,
//! role-conditioned agent replies gated by human review, and presence
//! analytics with the accompanying inferential statistics.

pub mod agent;
pub mod config;
pub mod engine;
pub mod forum;
pub mod hypergraph;
pub mod presence;
pub mod review;
pub mod stats;
pub mod synth;
pub mod targeting;
pub mod timefmt;

pub use config::EngineConfig;
pub use engine::{Engine, EngineError};

/// Crate version reported by the health endpoint.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
