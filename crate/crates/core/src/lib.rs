//! Penalized joint M-estimation of group scatter matrices.
//!
//! Each group scatter matrix is pulled toward a common center through a
//! geodesically convex distance. The crate provides the SPD matrix layer,
//! robust losses, distances and their means, the fixed-point solvers, cross
//! validation of the shrinkage parameter, and regularized discriminant
//! analysis built on top of them.

pub mod distances;
pub mod error;
pub mod estimators;
pub mod losses;
pub mod modelselect;
pub mod pds;
pub mod rda;
pub mod special;

pub use error::{Error, Result};
