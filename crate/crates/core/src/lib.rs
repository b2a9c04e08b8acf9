//! Stochastic simulation and analysis of biological reaction networks with
//! bounded growth, with builders for two-resource competition protocols.

pub mod analysis;
pub mod brn;
pub mod chains;
mod error;
pub mod parallel;
pub mod protocols;
pub mod rng;
pub mod ssa;

pub use brn::{Brn, BrnBuilder, Configuration, GrowthRate, PropensityKind, Reaction, Species, SpeciesId};
pub use error::{Error, Result};
pub use rng::{derive_seed, RngStream};
pub use ssa::{Engine, RecordingPolicy, StopCondition, Termination, Trajectory};
