//! COPE: joint cost-and-prediction elicitation from strategic agents.
//!
//! A principal buys noisy Gaussian observations of an unknown `x` from agents
//! with private cost types. The crate provides the optimal effort schedules and
//! payment rules for linear, quadratic and general costs, the Bayes predictor,
//! the centralized and homogeneous benchmarks, best-response oracles for the
//! agents, and a seeded Monte-Carlo engine.

pub mod agent;
pub mod benchmarks;
pub mod cost;
pub mod cubic;
pub mod error;
pub mod mechanism;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod sim;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
