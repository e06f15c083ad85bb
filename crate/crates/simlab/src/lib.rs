//! Simulation lab: elliptical samplers, Monte Carlo misclassification
//! experiments for regularized discriminant analysis, and the IRIS study.
//!
//! All randomness flows from one seed through named ChaCha streams, so a
//! specification reproduces every reported number exactly.

pub mod error;
pub mod experiment;
pub mod iris;
pub mod methods;
pub mod output;
pub mod sampling;
pub mod stats;

pub use error::{SimError, SimResult};
pub use experiment::{beta_grid, run_experiment, ExperimentReport, ExperimentSpec, Family, MethodSummary, Scenario};
pub use iris::{iris, run_iris, IrisReport, IrisSpec};
pub use methods::{LossFamily, MethodTag, IRIS_METHODS, SIMULATION_METHODS};
