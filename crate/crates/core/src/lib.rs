//! Multi-radar target tracking with probabilistic data association.
//!
//! The crate simulates range/bearing/Doppler reports of point targets from
//! a network of stationary radars, tracks each target with an extended
//! Kalman filter fed by PDA-fused measurements, and evaluates the
//! recursive Bayesian Cramer-Rao lower bound for the same scenario.

pub mod bcrlb;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod measurement;
pub mod model;
pub mod output;
pub mod pda;
pub mod rng;
pub mod scenario;
pub mod scene;
pub mod tracker;

pub use error::{Error, Result};
