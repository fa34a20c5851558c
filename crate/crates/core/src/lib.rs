//! Single-target elliptic localization for distributed MIMO radar.
//!
//! The crate simulates noisy bistatic-range measurements over a distributed
//! transmitter/receiver constellation and estimates the target position by
//! integrating analog-network gradient flows: a relaxed-energy-function
//! network and a weighted augmented-Lagrangian network, plus an extension
//! that treats uncertain antenna positions as additional unknowns. CRLB
//! benchmarks, accuracy metrics and a deterministic Monte-Carlo experiment
//! runner round out the toolbox.

pub mod energy;
pub mod error;
pub mod experiment;
pub mod geom;
pub mod measurement;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod scenario;
pub mod solver;
pub mod validate;

pub use energy::{ExtendedRnfState, LpnnState, RnfState};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentResults, ExperimentSpec, Method};
pub use measurement::MeasurementSet;
pub use metrics::MetricsReport;
pub use noise::NoiseModel;
pub use scenario::Scenario;
pub use solver::{SolveResult, SolverConfig};
