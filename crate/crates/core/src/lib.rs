//! Verbal reinforcement learning over behavior trees.
//!
//! An episode runs a [`bt::BehaviorTree`] against the simulated warehouse in
//! [`sim`], checkpoint by checkpoint. A [`critic`] turns observations and
//! traces into structured feedback, [`scoring`] computes the real score, and
//! an [`actor`] rewrites the tree for the next episode. [`runtime`] wires the
//! loop together and persists everything needed to replay it.

pub mod actor;
pub mod bt;
pub mod critic;
pub mod dsl;
pub mod exec;
pub mod remote;
pub mod rng;
pub mod runtime;
pub mod scoring;
pub mod sim;
