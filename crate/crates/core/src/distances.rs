//! Distances between SPD matrices and the weighted means they induce.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pds::PdsMatrix;

/// Iteration cap of the ellipticity mean fixed point.
pub const ELLIPTICITY_MEAN_MAX_ITER: usize = 1000;
/// Default residual tolerance of the ellipticity mean.
pub const ELLIPTICITY_MEAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Squared Frobenius distance. Not jointly g-convex; no estimator accepts it.
    Frobenius,
    /// Squared affine-invariant Riemannian distance. Value only.
    Riemannian,
    /// Scale-invariant ellipticity distance.
    Ellipticity,
    /// Gaussian Kullback–Leibler divergence.
    KullbackLeibler,
}

impl DistanceKind {
    /// Short tag used in method names.
    pub fn tag(&self) -> &'static str {
        match self {
            DistanceKind::Frobenius => "F",
            DistanceKind::Riemannian => "R",
            DistanceKind::Ellipticity => "E",
            DistanceKind::KullbackLeibler => "KL",
        }
    }

    /// Whether the distance is jointly geodesically convex.
    pub fn is_g_convex(&self) -> bool {
        !matches!(self, DistanceKind::Frobenius)
    }
}

/// Convex weights `π_k > 0` summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("weights must be non-empty"));
        }
        if values.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(domain("weights must be positive"));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("weights must sum to 1, got {total}")));
        }
        Ok(Self(values))
    }

    /// `π_k = n_k / N`.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if counts.iter().any(|&n| n == 0) {
            return Err(domain("group counts must be positive"));
        }
        let total: usize = counts.iter().sum();
        Self::new(counts.iter().map(|&n| n as f64 / total as f64).collect())
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k >= 1);
        Self(vec![1.0 / k as f64; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn same_dim(a: &PdsMatrix, b: &PdsMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

fn check_inputs(weights: &Weights, sigmas: &[PdsMatrix]) -> Result<usize> {
    if sigmas.is_empty() {
        return Err(domain("at least one matrix is required"));
    }
    if weights.len() != sigmas.len() {
        return Err(Error::DimensionMismatch {
            expected: sigmas.len(),
            got: weights.len(),
        });
    }
    let p = sigmas[0].dim();
    for s in sigmas {
        same_dim(&sigmas[0], s)?;
    }
    Ok(p)
}

/// `d(A, B)` for the chosen kind.
pub fn distance(kind: DistanceKind, a: &PdsMatrix, b: &PdsMatrix) -> Result<f64> {
    same_dim(a, b)?;
    let p = a.dim() as f64;
    let value = match kind {
        DistanceKind::Frobenius => (a.as_matrix() - b.as_matrix()).norm_squared(),
        DistanceKind::Riemannian => {
            let w = a.inv_sqrt();
            let inner = PdsMatrix::symmetrized(w.as_matrix() * b.as_matrix() * w.as_matrix())?;
            inner.eigenvalues().iter().map(|l| l.ln().powi(2)).sum()
        }
        DistanceKind::Ellipticity => {
            let tr = a.trace_inv_product(b);
            p * (tr / p).ln() - (b.log_det() - a.log_det())
        }
        DistanceKind::KullbackLeibler => {
            let tr = a.trace_inv_product(b);
            tr - (b.log_det() - a.log_det()) - p
        }
    };
    // Rounding can push a true zero slightly negative.
    Ok(value.max(0.0))
}

/// Gradient of `d(Σ_k, Σ)` with respect to `Σ_k⁻¹`, for the penalties that
/// have a closed-form fixed-point update.
pub fn penalty_gradient(kind: DistanceKind, sigma_k: &PdsMatrix, center: &PdsMatrix) -> Result<DMatrix<f64>> {
    same_dim(sigma_k, center)?;
    let p = sigma_k.dim() as f64;
    match kind {
        DistanceKind::KullbackLeibler => Ok(center.as_matrix() - sigma_k.as_matrix()),
        DistanceKind::Ellipticity => {
            let tr = sigma_k.trace_inv_product(center);
            Ok(center.as_matrix() * (p / tr) - sigma_k.as_matrix())
        }
        other => Err(domain(format!("no closed-form penalty gradient for {other:?}"))),
    }
}

/// Weighted arithmetic mean `Σ π_k Σ_k`.
pub fn arithmetic_mean(weights: &Weights, sigmas: &[PdsMatrix]) -> Result<PdsMatrix> {
    let p = check_inputs(weights, sigmas)?;
    let mut acc = DMatrix::zeros(p, p);
    for (w, s) in weights.values().iter().zip(sigmas) {
        acc += s.as_matrix() * *w;
    }
    PdsMatrix::symmetrized(acc)
}

/// Weighted harmonic mean `(Σ π_k Σ_k⁻¹)⁻¹`, the minimizer of `Σ π_k d_KL(Σ_k, ·)`.
pub fn kl_mean(weights: &Weights, sigmas: &[PdsMatrix]) -> Result<PdsMatrix> {
    let p = check_inputs(weights, sigmas)?;
    let mut acc = DMatrix::zeros(p, p);
    for (w, s) in weights.values().iter().zip(sigmas) {
        acc += s.inverse_matrix() * *w;
    }
    Ok(PdsMatrix::symmetrized(acc)?.inverse())
}

/// Outcome of the ellipticity mean iteration.
#[derive(Debug, Clone)]
pub struct MeanSolution {
    pub mean: PdsMatrix,
    pub iterations: usize,
    pub residual: f64,
}

fn ellipticity_rhs(weights: &Weights, sigmas: &[PdsMatrix], current: &PdsMatrix) -> Result<PdsMatrix> {
    let p = current.dim();
    let mut acc = DMatrix::zeros(p, p);
    for (w, s) in weights.values().iter().zip(sigmas) {
        let tr = s.trace_inv_product(current);
        acc += s.inverse_matrix() * (w * p as f64 / tr);
    }
    Ok(PdsMatrix::symmetrized(acc)?.inverse())
}

/// Ellipticity mean, the minimizer (up to scale) of `Σ π_k d_E(Σ_k, ·)`,
/// returned with `Tr(Σ) = p`.
pub fn ellipticity_mean(weights: &Weights, sigmas: &[PdsMatrix], tol: f64) -> Result<PdsMatrix> {
    Ok(ellipticity_mean_from(weights, sigmas, None, tol, ELLIPTICITY_MEAN_MAX_ITER)?.mean)
}

/// Ellipticity mean from an optional starting point.
///
/// Without `init`, starts from the arithmetic mean of the trace-normalized
/// inputs. Every iterate is rescaled to `Tr(Σ) = p`.
pub fn ellipticity_mean_from(
    weights: &Weights,
    sigmas: &[PdsMatrix],
    init: Option<&PdsMatrix>,
    tol: f64,
    max_iter: usize,
) -> Result<MeanSolution> {
    let p = check_inputs(weights, sigmas)?;
    if p < 2 {
        return Err(domain("the ellipticity mean is undefined for p = 1"));
    }
    if !(tol > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    let mut current = match init {
        Some(s) => {
            same_dim(&sigmas[0], s)?;
            s.trace_normalized()
        }
        None => {
            let normalized: Vec<PdsMatrix> = sigmas.iter().map(|s| s.trace_normalized()).collect();
            arithmetic_mean(weights, &normalized)?.trace_normalized()
        }
    };
    let mut residual = f64::INFINITY;
    for iteration in 0..max_iter {
        let rhs = ellipticity_rhs(weights, sigmas, &current)?;
        residual = (current.as_matrix() - rhs.as_matrix()).norm() / current.as_matrix().norm();
        if residual < tol {
            return Ok(MeanSolution {
                mean: current,
                iterations: iteration,
                residual,
            });
        }
        current = rhs.trace_normalized();
    }
    Err(Error::Numerical(format!(
        "ellipticity mean did not converge in {max_iter} iterations (residual {residual:e})"
    )))
}
