//! Monocular-camera distance observer based on integral concurrent learning,
//! an observability-aware LQR velocity planner, and a closed-loop simulation
//! harness around both.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod observer;
pub mod planner;
pub mod scene;

pub use error::{Error, Result};
