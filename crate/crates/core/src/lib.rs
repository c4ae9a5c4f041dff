//! Cislunar state and uncertainty propagation in Cartesian and modified
//! generalized equinoctial element coordinates.
//!
//! The crate propagates spacecraft trajectories under Earth-Moon-Sun point
//! mass gravity in two interchangeable formulations, carries Monte Carlo
//! ensembles through either one, and scores the Gaussianity of each ensemble
//! over time with the Henze-Zirkler multivariate normality test.
//!
//! Everything internal runs in canonical units (mean Earth-Moon distance,
//! combined Earth-Moon gravitational parameter); dimensional values appear
//! only at I/O boundaries.

// validation guards use `!(x > 0.0)` so NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bodies;
pub mod elements;
pub mod ephemeris;
pub mod error;
pub mod forces;
pub mod frames;
pub mod output;
pub mod pipeline;
pub mod propagation;
pub mod scenario;
pub mod state;
pub mod uncertainty;
pub mod units;

pub use bodies::{Body, BodyConstants};
pub use elements::MGeqoeState;
pub use error::{Error, Result};
pub use propagation::{CoordKind, DynamicsConfig, OdeSettings, Trajectory};
pub use state::{CartesianState, Epoch};
pub use units::CanonicalUnits;
