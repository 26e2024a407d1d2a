//! Online convex optimization with long-term constraints.
//!
//! Decisions are made by a drift-plus-penalty rule driven by virtual queues,
//! one per constraint. The crate also carries baselines, a seeded experiment
//! harness and a parameter tuner.

pub mod algorithm;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod tuner;
pub mod vqueue;

pub use algorithm::{
    certified_bounds, default_schedule, run, run_doubling, run_with, AlgorithmParams,
    CertifiedBounds, RoundTrace, RunOptions, Trajectory,
};
pub use error::{Error, Result};
pub use problem::{
    ConstraintFunction, Constants, KnownConstants, LinearLosses, LossOracle, ProblemInstance,
    SimpleSet,
};
pub use vqueue::QueueState;
