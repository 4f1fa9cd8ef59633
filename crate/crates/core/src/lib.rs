//! Communication-control co-design for wireless edge control loops.
//!
//! Plants run over a shared lossy, delayed channel. A QoS-aware OFDMA
//! scheduler serves their traffic, and a staged derivative-free pipeline
//! learns a controller, a state estimator tolerant of stale observations, and
//! a reliability policy that asks the network for only as much as the task
//! needs.

pub mod error;
pub mod harness;
pub mod learning;
mod linalg;
pub mod netmodel;
pub mod plants;
pub mod policies;
pub mod rng;
pub mod scheduler;
pub mod sim;

pub use error::{Error, Result};
