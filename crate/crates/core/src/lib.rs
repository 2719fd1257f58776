//! Classify traffic environments as structured or unstructured from
//! pedestrian and vehicle trajectories.
//!
//! The pipeline ingests trajectory recordings ([`trajstore`]), measures
//! per-agent motion statistics ([`kinematics`], [`pedfeat`], [`vehfeat`])
//! and pedestrian–vehicle interactions ([`interact`]), assembles a
//! 13-column per-pedestrian feature matrix ([`featmat`]), groups recordings
//! into two behavioral clusters ([`cluster`]), and fits a binomial-logit
//! model explaining the cluster label from pedestrian behavior alone
//! ([`glmfit`]). [`synthgen`] generates seeded synthetic scenes with known
//! regime for end-to-end validation, and [`pipeline`] wires the stages into
//! the artifacts the `sceneclass` binary writes.

pub mod cluster;
pub mod config;
pub mod error;
pub mod featmat;
pub mod glmfit;
pub mod interact;
pub mod kinematics;
pub mod pedfeat;
pub mod pipeline;
pub mod synthgen;
pub mod trajstore;
pub mod vehfeat;

mod linalg;
mod stats;

pub use error::{Error, Result};
