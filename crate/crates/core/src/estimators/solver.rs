use std::borrow::Cow;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distances::{distance, ellipticity_mean_from, kl_mean, DistanceKind, ELLIPTICITY_MEAN_MAX_ITER};
use crate::error::{domain, Error, Result};
use crate::losses::LossSpec;
use crate::pds::{PdsMatrix, SymMatrix};

use super::accel::squarem;
use super::data::GroupedSample;
use super::scatter::{check_tyler_rows, mahalanobis_rows, weighted_outer};
use super::tyler::{check_tyler_condition, exhaustive_feasible, ConditionMode, TylerCondition};

/// Default stopping tolerance on the relative Frobenius change per cycle.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default cap on fixed-point cycles.
pub const DEFAULT_MAX_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    /// One M-estimator shared by all groups.
    Pooled,
    /// Shrink each group toward the pooled M-estimator.
    Prop1,
    /// Estimate the groups and their center jointly.
    Prop2,
}

impl Proposal {
    pub fn tag(&self) -> &'static str {
        match self {
            Proposal::Pooled => "Pooled",
            Proposal::Prop1 => "Prop1",
            Proposal::Prop2 => "Prop2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub proposal: Proposal,
    pub loss: LossSpec,
    /// Per-group losses overriding `loss`.
    pub group_losses: Option<Vec<LossSpec>>,
    pub penalty: DistanceKind,
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Rescale Tyler iterates to unit average eigenvalue when their scale is free.
    pub normalize_tyler: bool,
}

impl EstimatorConfig {
    /// Ellipticity penalty for Tyler's loss, Kullback–Leibler otherwise.
    pub fn new(proposal: Proposal, loss: LossSpec, beta: f64) -> Self {
        let penalty = if loss.is_tyler() {
            DistanceKind::Ellipticity
        } else {
            DistanceKind::KullbackLeibler
        };
        Self {
            proposal,
            loss,
            group_losses: None,
            penalty,
            beta,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            normalize_tyler: true,
        }
    }

    pub fn with_penalty(mut self, penalty: DistanceKind) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_group_losses(mut self, losses: Vec<LossSpec>) -> Self {
        self.group_losses = Some(losses);
        self
    }

    pub fn loss_for(&self, k: usize) -> &LossSpec {
        match &self.group_losses {
            Some(l) => &l[k],
            None => &self.loss,
        }
    }

    /// Penalty weight `λ = (1 − β)/β` of the equivalent penalized likelihood.
    pub fn lambda(&self) -> f64 {
        (1.0 - self.beta) / self.beta
    }

    pub fn validate(&self, data: &GroupedSample) -> Result<()> {
        let p = data.dim();
        if self.proposal != Proposal::Pooled && !(0.0..=1.0).contains(&self.beta) {
            return Err(domain(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.tol > 0.0) {
            return Err(domain(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(domain("max_iter must be at least 1"));
        }
        match self.penalty {
            DistanceKind::KullbackLeibler => {}
            DistanceKind::Ellipticity if p >= 2 => {}
            DistanceKind::Ellipticity => return Err(domain("the ellipticity penalty needs p ≥ 2")),
            other => {
                return Err(domain(format!(
                    "penalty {other:?} has no fixed-point update; use kl or ellipticity"
                )))
            }
        }
        if let Some(l) = &self.group_losses {
            if l.len() != data.num_groups() {
                return Err(Error::DimensionMismatch {
                    expected: data.num_groups(),
                    got: l.len(),
                });
            }
        }
        for k in 0..data.num_groups() {
            let loss = self.loss_for(k);
            if loss.p() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: loss.p(),
                });
            }
            if loss.is_tyler() {
                check_tyler_rows(data.group(k))?;
            }
        }
        Ok(())
    }

    fn normalizes(&self, k: usize) -> bool {
        self.normalize_tyler
            && self.loss_for(k).is_tyler()
            && (self.penalty == DistanceKind::Ellipticity || self.beta == 1.0)
    }

    fn all_tyler(&self, k: usize) -> bool {
        (0..k).all(|j| self.loss_for(j).is_tyler())
    }
}

/// Starting point for warm-started fits.
#[derive(Debug, Clone)]
pub struct FitStart {
    pub sigmas: Vec<PdsMatrix>,
    pub center: PdsMatrix,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub sigmas: Vec<PdsMatrix>,
    pub center: PdsMatrix,
    pub iterations: usize,
    pub final_residual: f64,
    /// Objective before the first cycle and after each cycle.
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    pub fn as_start(&self) -> FitStart {
        FitStart {
            sigmas: self.sigmas.clone(),
            center: self.center.clone(),
        }
    }
}

/// One group at a given scatter, with its Mahalanobis distances.
struct GroupState<'a> {
    x: &'a DMatrix<f64>,
    loss: &'a LossSpec,
    sigma: PdsMatrix,
    t: Vec<f64>,
}

impl<'a> GroupState<'a> {
    fn new(x: &'a DMatrix<f64>, loss: &'a LossSpec, sigma: PdsMatrix) -> Self {
        let t = mahalanobis_rows(x, &sigma);
        Self { x, loss, sigma, t }
    }

    fn psi(&self) -> DMatrix<f64> {
        weighted_outer(self.x, self.t.iter().map(|&t| self.loss.weight_unchecked(t)))
    }

    /// `(1/n) Σ ρ(tᵢ) + log|Σ|`.
    fn likelihood(&self) -> f64 {
        let n = self.t.len() as f64;
        self.t.iter().map(|&t| self.loss.rho_unchecked(t)).sum::<f64>() / n + self.sigma.log_det()
    }
}

fn certify(m: DMatrix<f64>, what: &str) -> Result<PdsMatrix> {
    match PdsMatrix::symmetrized(m.clone()) {
        Ok(s) => Ok(s),
        Err(_) => {
            let detail = match SymMatrix::symmetrized(m).and_then(|s| s.eig()) {
                Ok(e) => {
                    let max = e.values[0].abs().max(f64::MIN_POSITIVE);
                    let rank = e.values.iter().filter(|v| **v > 1e-12 * max).count();
                    format!("numerical rank {rank} of {}", e.values.len())
                }
                Err(_) => "non-finite entries".to_string(),
            };
            Err(Error::Numerical(format!("{what} iterate is singular ({detail})")))
        }
    }
}

fn data_scale(data: &GroupedSample) -> f64 {
    let n = data.total() as f64;
    let s = data.groups().iter().map(|g| g.norm_squared()).sum::<f64>() / (n * data.dim() as f64);
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

fn ensure_tyler(x: &DMatrix<f64>, beta: f64, label: &str) -> Result<()> {
    let mut verdict = check_tyler_condition(x, beta, ConditionMode::GeneralPosition)?;
    if matches!(verdict, TylerCondition::NotInGeneralPosition(_)) && exhaustive_feasible(x.nrows(), x.ncols()) {
        verdict = check_tyler_condition(x, beta, ConditionMode::Exhaustive)?;
    }
    let (n, p) = (x.nrows(), x.ncols());
    match verdict {
        TylerCondition::Holds => Ok(()),
        TylerCondition::NotInGeneralPosition(w) => {
            log::warn!(
                "{label}: points {:?} are linearly dependent; Tyler existence not verified",
                w.indices
            );
            Ok(())
        }
        TylerCondition::Boundary(w) => {
            log::warn!(
                "{label}: {} of n = {n} points lie in a {}-dimensional subspace; Tyler condition holds only with equality",
                w.count, w.dim
            );
            Ok(())
        }
        TylerCondition::Violated(w) => Err(Error::Precondition(format!(
            "Tyler existence condition fails for {label}: {} of n = {n} points lie in a \
             {}-dimensional subspace, need count/n < dim/(pβ) with p = {p}, β = {beta}",
            w.count, w.dim
        ))),
    }
}

/// Observations exactly at the center carry no direction under Tyler's loss
/// and are dropped from groups that use it.
fn without_tyler_zero_rows<'a>(data: &'a GroupedSample, config: &EstimatorConfig) -> Result<Cow<'a, GroupedSample>> {
    let k_groups = data.num_groups();
    if config.group_losses.as_ref().is_some_and(|l| l.len() != k_groups) {
        return Ok(Cow::Borrowed(data));
    }
    let is_zero = |g: &DMatrix<f64>, i: usize| g.row(i).iter().all(|v| *v == 0.0);
    let dropped = (0..k_groups).any(|k| {
        let g = data.group(k);
        config.loss_for(k).is_tyler() && (0..g.nrows()).any(|i| is_zero(g, i))
    });
    if !dropped {
        return Ok(Cow::Borrowed(data));
    }
    let keep: Vec<Vec<usize>> = (0..k_groups)
        .map(|k| {
            let g = data.group(k);
            (0..g.nrows())
                .filter(|&i| !(config.loss_for(k).is_tyler() && is_zero(g, i)))
                .collect()
        })
        .collect();
    if keep.iter().any(Vec::is_empty) {
        return Err(domain("Tyler loss needs at least one observation away from the center"));
    }
    log::debug!("dropping observations at the center for Tyler's loss");
    Ok(Cow::Owned(data.subset(&keep)?))
}

/// Pooled M-estimator `Σ = (1/N) Σ_k Σ_i u(xᵀΣ⁻¹x) x xᵀ` for a single loss.
pub fn pooled_m_estimator(data: &GroupedSample, loss: &LossSpec, tol: f64, max_iter: usize) -> Result<PdsMatrix> {
    let config = EstimatorConfig::new(Proposal::Pooled, *loss, 1.0)
        .with_tol(tol)
        .with_max_iter(max_iter)
        .with_penalty(DistanceKind::KullbackLeibler);
    let data = &*without_tyler_zero_rows(data, &config)?;
    config.validate(data)?;
    Ok(pooled_solve(data, &config, None)?.0)
}

fn pooled_solve(data: &GroupedSample, config: &EstimatorConfig, init: Option<&PdsMatrix>) -> Result<(PdsMatrix, usize, f64, Vec<f64>)> {
    let k_groups = data.num_groups();
    let normalize = config.normalize_tyler && config.all_tyler(k_groups);
    if (0..k_groups).any(|k| config.loss_for(k).is_tyler()) {
        ensure_tyler(&data.pooled(), 1.0, "the pooled sample")?;
    }
    let p = data.dim();
    let start = match init {
        Some(s) => s.clone(),
        None => PdsMatrix::scaled_identity(p, data_scale(data)),
    };
    let start = if normalize { start.trace_normalized() } else { start };
    let pi = data.weights().values();
    let map = |x: &[PdsMatrix]| -> Result<Vec<PdsMatrix>> {
        let mut m = DMatrix::zeros(p, p);
        for (k, w) in pi.iter().enumerate() {
            m += GroupState::new(data.group(k), config.loss_for(k), x[0].clone()).psi() * *w;
        }
        let next = certify(m, "pooled")?;
        Ok(vec![if normalize { next.trace_normalized() } else { next }])
    };
    let objective = |x: &[PdsMatrix]| -> Result<f64> {
        Ok(pi
            .iter()
            .enumerate()
            .map(|(k, w)| w * GroupState::new(data.group(k), config.loss_for(k), x[0].clone()).likelihood())
            .sum())
    };
    let out = squarem(vec![start], map, objective, config.tol, config.max_iter, "pooled estimator")?;
    let sigma = out.state.into_iter().next().expect("one component");
    Ok((sigma, out.evaluations, out.residual, out.trace))
}

/// Shrinkage toward the pooled M-estimator.
pub fn prop1_solve(data: &GroupedSample, config: &EstimatorConfig) -> Result<FitResult> {
    let mut c = config.clone();
    c.proposal = Proposal::Prop1;
    fit_from(data, &c, None)
}

/// Joint estimation of the groups and their center.
pub fn prop2_solve(data: &GroupedSample, config: &EstimatorConfig) -> Result<FitResult> {
    let mut c = config.clone();
    c.proposal = Proposal::Prop2;
    fit_from(data, &c, None)
}

pub fn fit(data: &GroupedSample, config: &EstimatorConfig) -> Result<FitResult> {
    fit_from(data, config, None)
}

/// Fits from an optional warm start (ignored by incompatible dimensions).
pub fn fit_from(data: &GroupedSample, config: &EstimatorConfig, start: Option<&FitStart>) -> Result<FitResult> {
    let data = &*without_tyler_zero_rows(data, config)?;
    config.validate(data)?;
    let k_groups = data.num_groups();
    let p = data.dim();
    let start = start.filter(|s| s.sigmas.len() == k_groups && s.center.dim() == p);

    if config.proposal == Proposal::Pooled {
        let (center, iterations, final_residual, objective_trace) =
            pooled_solve(data, config, start.map(|s| &s.center))?;
        return Ok(FitResult {
            sigmas: vec![center.clone(); k_groups],
            center,
            iterations,
            final_residual,
            objective_trace,
        });
    }

    for k in 0..k_groups {
        if config.loss_for(k).is_tyler() {
            ensure_tyler(data.group(k), config.beta, &format!("group {k}"))?;
        }
    }

    let scale = data_scale(data);
    let center = match config.proposal {
        Proposal::Prop1 => pooled_solve(data, config, start.map(|s| &s.center))?.0,
        _ => match (start, config.penalty) {
            (Some(s), DistanceKind::Ellipticity) => s.center.trace_normalized(),
            (Some(s), _) => s.center.clone(),
            (None, DistanceKind::Ellipticity) => PdsMatrix::identity(p),
            (None, _) => PdsMatrix::scaled_identity(p, scale),
        },
    };

    let mut state: Vec<PdsMatrix> = (0..k_groups)
        .map(|k| {
            let s = match start {
                Some(s) => s.sigmas[k].clone(),
                None => PdsMatrix::scaled_identity(p, scale),
            };
            if config.normalizes(k) {
                s.trace_normalized()
            } else {
                s
            }
        })
        .collect();
    let joint = config.proposal == Proposal::Prop2;
    // Prop2 carries the center as the last component; Prop1 keeps it fixed.
    if joint {
        state.push(center.clone());
    }
    let fixed_center = center;

    let pi = data.weights().values().to_vec();
    let beta = config.beta;
    let inner_tol = (config.tol * 1e-2).max(1e-12);
    let center_of = |x: &[PdsMatrix]| if joint { x[k_groups].clone() } else { fixed_center.clone() };

    let map = |x: &[PdsMatrix]| -> Result<Vec<PdsMatrix>> {
        let center = center_of(x);
        let mut out = Vec::with_capacity(x.len());
        for (k, sigma) in x[..k_groups].iter().enumerate() {
            let mut m = GroupState::new(data.group(k), config.loss_for(k), sigma.clone()).psi() * beta;
            if beta < 1.0 {
                let target = match config.penalty {
                    DistanceKind::Ellipticity => center.as_matrix() * (p as f64 / sigma.trace_inv_product(&center)),
                    _ => center.as_matrix().clone(),
                };
                m += target * (1.0 - beta);
            }
            let next = certify(m, &format!("group {k}"))?;
            out.push(if config.normalizes(k) { next.trace_normalized() } else { next });
        }
        if joint {
            let next = match config.penalty {
                DistanceKind::Ellipticity => {
                    ellipticity_mean_from(data.weights(), &out, Some(&center), inner_tol, ELLIPTICITY_MEAN_MAX_ITER)?.mean
                }
                _ => kl_mean(data.weights(), &out)?,
            };
            out.push(next);
        }
        Ok(out)
    };
    let objective = |x: &[PdsMatrix]| -> Result<f64> {
        let center = center_of(x);
        let mut total = 0.0;
        for (k, w) in pi.iter().enumerate() {
            let mut v = beta * GroupState::new(data.group(k), config.loss_for(k), x[k].clone()).likelihood();
            if beta < 1.0 {
                v += (1.0 - beta) * distance(config.penalty, &x[k], &center)?;
            }
            total += w * v;
        }
        Ok(total)
    };

    let out = squarem(state, map, objective, config.tol, config.max_iter, config.proposal.tag())?;
    let mut sigmas = out.state;
    let center = if joint { sigmas.pop().expect("center component") } else { fixed_center };
    Ok(FitResult {
        sigmas,
        center,
        iterations: out.evaluations,
        final_residual: out.residual,
        objective_trace: out.trace,
    })
}

/// `Σ_k π_k {β L_k(Σ_k) + (1 − β) d(Σ_k, Σ)}`; for the pooled proposal the
/// unpenalized pooled likelihood at `center`.
pub fn objective(data: &GroupedSample, config: &EstimatorConfig, sigmas: &[PdsMatrix], center: &PdsMatrix) -> Result<f64> {
    config.validate(data)?;
    if sigmas.len() != data.num_groups() {
        return Err(Error::DimensionMismatch {
            expected: data.num_groups(),
            got: sigmas.len(),
        });
    }
    let pooled = config.proposal == Proposal::Pooled;
    let mut total = 0.0;
    for (k, w) in data.weights().values().iter().enumerate() {
        let sigma = if pooled { center } else { &sigmas[k] };
        if sigma.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: sigma.dim(),
            });
        }
        let state = GroupState::new(data.group(k), config.loss_for(k), sigma.clone());
        let mut v = state.likelihood();
        if !pooled {
            v *= config.beta;
            if config.beta < 1.0 {
                v += (1.0 - config.beta) * distance(config.penalty, sigma, center)?;
            }
        }
        total += w * v;
    }
    Ok(total)
}
