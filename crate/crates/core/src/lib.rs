//! Distortion-rate modeling and bit allocation for multi-stream systems.
//!
//! When a model's intermediate feature tensors are compressed before
//! transmission, each inference task degrades as a convex, monotonically
//! decreasing function of the per-stream bit rates. This crate fits that
//! surface family to measured samples, computes optimal allocations under a
//! total-rate budget (closed-form reverse water-filling for one task,
//! weighted scalarization for several), and characterizes the Pareto set of
//! multi-task systems: exactly for 2-stream systems, and as a bounding
//! polygon for 3-stream 2-task systems.

pub mod alloc;
pub mod error;
pub mod fit;
pub mod model;
pub mod pareto;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    evaluate_surface, surface_gradient, task_distortion, AccuracyPair, Allocation,
    AllocationProblem, DistortionSurface, RateVector, TaskWeights,
};
