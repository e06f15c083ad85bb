//! M-estimation of group scatter matrices: pooled estimation, shrinkage
//! toward a pooled target, and joint estimation with a shared center.

mod accel;
mod data;
mod location;
mod scatter;
mod solver;
mod tyler;

pub use data::GroupedSample;
pub use location::{sample_mean, spatial_median, Centering, SPATIAL_MEDIAN_MAX_ITER, SPATIAL_MEDIAN_TOL};
pub use scatter::{scm, weighted_scatter};
pub use solver::{
    fit, fit_from, objective, pooled_m_estimator, prop1_solve, prop2_solve, EstimatorConfig, FitResult, FitStart,
    Proposal, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use tyler::{check_tyler_condition, tyler_covariance_rescale, ConditionMode, SubspaceWitness, TylerCondition};
