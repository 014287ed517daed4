//! Online railway deadlock detection.
//!
//! Given an interlocking-level infrastructure model and the current train
//! positions, decide whether every train can still reach one of its
//! destinations (live) or whether the system is bound for deadlock (dead).
//! The decision is made by incremental bounded SAT planning with parallel
//! actions, a global progress constraint and a maximal progress constraint.

pub mod api;
pub mod cli;
pub mod detector;
pub mod dynamics;
pub mod encoder;
pub mod generator;
pub mod model;
pub mod oracle;
pub mod sat;

pub use detector::{detect, Algorithm, DetectOptions, Plan, PlannedAction, Status, Verdict};
pub use dynamics::SimState;
pub use model::{parse_instance, serialize_instance, ProblemInstance};
