//! Loss functions `ρ` for M-estimation of scatter, their weight functions
//! `u = ρ'` and the Fisher-consistency scale constants.
//!
//! All losses are evaluated at a squared Mahalanobis distance `t = xᵀΣ⁻¹x`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special::{chi2_cdf, chi2_expectation, chi2_quantile, chi2_sf};

/// Default Huber tuning: `c²` is this quantile of `χ²_p`.
pub const DEFAULT_HUBER_QUANTILE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Gaussian,
    /// Elliptical t with `nu` degrees of freedom.
    TDist { nu: f64 },
    /// Huber loss with squared threshold `c_sq = c²`.
    Huber { c_sq: f64 },
    Tyler,
}

/// A loss family bound to a dimension `p` and a consistency scale `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    kind: LossKind,
    b: f64,
    p: usize,
}

fn check_p(p: usize) -> Result<u32> {
    if p == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    u32::try_from(p).map_err(|_| domain("dimension too large"))
}

impl LossSpec {
    pub fn gaussian(p: usize) -> Self {
        assert!(p >= 1, "dimension must be at least 1");
        Self {
            kind: LossKind::Gaussian,
            b: 1.0,
            p,
        }
    }

    pub fn tyler(p: usize) -> Self {
        assert!(p >= 1, "dimension must be at least 1");
        Self {
            kind: LossKind::Tyler,
            b: 1.0,
            p,
        }
    }

    /// t-loss made Fisher consistent at the Gaussian via [`tdist_b`].
    pub fn t_dist(nu: f64, p: usize) -> Result<Self> {
        let b = tdist_b(nu, p)?;
        Ok(Self {
            kind: LossKind::TDist { nu },
            b,
            p,
        })
    }

    /// Huber loss with `c² = F⁻¹_{χ²_p}(q)` and the matching consistency scale.
    pub fn huber(q: f64, p: usize) -> Result<Self> {
        let dof = check_p(p)?;
        let c_sq = chi2_quantile(q, dof)?;
        Self::huber_with_threshold(c_sq.sqrt(), p)
    }

    /// Huber loss with an explicit threshold `c > 0`.
    pub fn huber_with_threshold(c: f64, p: usize) -> Result<Self> {
        let b = huber_b(c, p)?;
        Ok(Self {
            kind: LossKind::Huber { c_sq: c * c },
            b,
            p,
        })
    }

    /// Replaces the scale constant `b`.
    pub fn with_scale(mut self, b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(domain(format!("loss scale must be positive, got {b}")));
        }
        self.b = b;
        Ok(self)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_tyler(&self) -> bool {
        matches!(self.kind, LossKind::Tyler)
    }

    /// One-letter family tag used in method names (G, t, H, T).
    pub fn tag(&self) -> &'static str {
        match self.kind {
            LossKind::Gaussian => "G",
            LossKind::TDist { .. } => "t",
            LossKind::Huber { .. } => "H",
            LossKind::Tyler => "T",
        }
    }

    fn check_arg(&self, t: f64) -> Result<()> {
        match self.kind {
            LossKind::Tyler if !(t > 0.0) => Err(domain(format!(
                "Tyler loss needs a strictly positive argument, got {t}"
            ))),
            _ if !(t >= 0.0) => Err(domain(format!("loss argument must be non-negative, got {t}"))),
            _ => Ok(()),
        }
    }

    /// `ρ(t)`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        self.check_arg(t)?;
        Ok(self.rho_unchecked(t))
    }

    /// Weight `u(t) = ρ'(t)`.
    pub fn weight(&self, t: f64) -> Result<f64> {
        self.check_arg(t)?;
        Ok(self.weight_unchecked(t))
    }

    /// `ψ(t) = t·u(t)`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        Ok(t * self.weight(t)?)
    }

    pub(crate) fn rho_unchecked(&self, t: f64) -> f64 {
        let p = self.p as f64;
        match self.kind {
            LossKind::Gaussian => t,
            LossKind::TDist { nu } => (nu + p) * (nu + t).ln() / self.b,
            LossKind::Huber { c_sq } => {
                if t <= c_sq {
                    t / self.b
                } else {
                    c_sq / self.b * ((t / c_sq).ln() + 1.0)
                }
            }
            LossKind::Tyler => p * t.ln(),
        }
    }

    pub(crate) fn weight_unchecked(&self, t: f64) -> f64 {
        let p = self.p as f64;
        match self.kind {
            LossKind::Gaussian => 1.0,
            LossKind::TDist { nu } => (nu + p) / (nu + t) / self.b,
            // Left branch at the kink; u is continuous there.
            LossKind::Huber { c_sq } => {
                if t <= c_sq {
                    1.0 / self.b
                } else {
                    c_sq / (t * self.b)
                }
            }
            LossKind::Tyler => p / t,
        }
    }
}

/// Huber scale `b = F_{χ²_{p+2}}(c²) + c²(1 − F_{χ²_p}(c²))/p`, giving Fisher
/// consistency at the Gaussian.
pub fn huber_b(c: f64, p: usize) -> Result<f64> {
    let dof = check_p(p)?;
    if !(c > 0.0) {
        return Err(domain(format!("Huber threshold must be positive, got {c}")));
    }
    let c_sq = c * c;
    if c_sq.is_infinite() {
        return Ok(1.0);
    }
    Ok(chi2_cdf(c_sq, dof + 2)? + c_sq * chi2_sf(c_sq, dof)? / p as f64)
}

/// t-loss scale `b = ((ν+p)/p) E[χ²_p / (ν + χ²_p)]`, by quadrature.
pub fn tdist_b(nu: f64, p: usize) -> Result<f64> {
    let dof = check_p(p)?;
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(domain(format!("degrees of freedom must be positive, got {nu}")));
    }
    let pf = p as f64;
    let expectation = chi2_expectation(|x| x / (nu + x), dof, 1e-11)?;
    Ok((nu + pf) / pf * expectation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_values() {
        let g = LossSpec::gaussian(3);
        assert_eq!(g.rho(3.7).unwrap(), 3.7);
        assert_eq!(g.weight(0.2).unwrap(), 1.0);
        assert_eq!(g.weight(1e6).unwrap(), 1.0);
    }

    #[test]
    fn tyler_values() {
        let t = LossSpec::tyler(4);
        assert_relative_eq!(t.rho(std::f64::consts::E).unwrap(), 4.0, epsilon = 1e-14);
        assert_eq!(LossSpec::tyler(3).weight(6.0).unwrap(), 0.5);
        assert!(t.rho(0.0).is_err());
        assert!(t.weight(-1.0).is_err());
    }

    #[test]
    fn tdist_weight_example() {
        let t = LossSpec::t_dist(2.0, 2).unwrap();
        assert_relative_eq!(t.weight(2.0).unwrap() * t.b(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn negative_arguments_rejected() {
        assert!(LossSpec::gaussian(2).rho(-0.1).is_err());
        assert!(LossSpec::huber(0.9, 2).unwrap().weight(-0.1).is_err());
    }

    #[test]
    fn huber_continuous_at_kink() {
        let h = LossSpec::huber_with_threshold(1.7, 3).unwrap().with_scale(1.0).unwrap();
        let c_sq = 1.7 * 1.7;
        let left = h.rho(c_sq).unwrap();
        let right = h.rho(c_sq * (1.0 + 1e-12)).unwrap();
        assert_relative_eq!(left, right, epsilon = 1e-10);
        assert_eq!(h.weight(c_sq).unwrap(), 1.0);
    }

    #[test]
    fn huber_b_examples() {
        let c_sq = chi2_quantile(0.9, 4).unwrap();
        let b = huber_b(c_sq.sqrt(), 4).unwrap();
        let expected = chi2_cdf(c_sq, 6).unwrap() + c_sq * 0.1 / 4.0;
        assert_relative_eq!(b, expected, epsilon = 1e-12);
        assert_relative_eq!(huber_b(40.0, 4).unwrap(), 1.0, epsilon = 1e-12);
        for p in [1, 3, 10] {
            let c = 1e-4;
            let ratio = c * c / huber_b(c, p).unwrap();
            assert_relative_eq!(ratio, p as f64, max_relative = 1e-4);
        }
    }

    #[test]
    fn tdist_b_limits() {
        assert_relative_eq!(tdist_b(1e7, 3).unwrap(), 1.0, epsilon = 1e-6);
        for p in [1, 2, 5, 10] {
            for nu in [0.5, 1.0, 2.0, 5.0] {
                assert!(tdist_b(nu, p).unwrap() > 0.0);
            }
        }
        assert!(tdist_b(0.0, 2).is_err());
    }

    #[test]
    fn huber_limits() {
        // Large c: Gaussian on compacts.
        let h = LossSpec::huber_with_threshold(50.0, 3).unwrap();
        for t in [0.1, 1.0, 10.0, 100.0] {
            assert_relative_eq!(h.rho(t).unwrap(), t, max_relative = 1e-9);
        }
        // Small c: shifted loss tends to Tyler's p·log t.
        let c: f64 = 1e-4;
        let h = LossSpec::huber_with_threshold(c, 3).unwrap();
        let shift = c * c * (1.0 - (c * c).ln()) / h.b();
        for t in [0.5, 1.0, 4.0, 30.0] {
            assert!((h.rho(t).unwrap() - shift - 3.0 * t.ln()).abs() < 1e-6);
        }
    }
}
