//! Simulation of delayed-pump intermodal four-wave-mixing photon-pair
//! sources in width-tapered multimode waveguides.
//!
//! The pipeline is: [`model::SourceConfig`] -> [`pump::propagate_pumps`] ->
//! [`jta::evolve_jta`] -> [`metrics`] and [`interference`].

pub mod analytic;
pub mod error;
pub mod grid;
pub mod interference;
pub mod io;
pub mod jta;
pub mod metrics;
pub mod model;
pub mod pump;

pub use error::{Error, Result};
