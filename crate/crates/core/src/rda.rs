//! Regularized discriminant analysis with M-estimated class scatter matrices.
//!
//! A point is assigned to the class minimizing
//! `(x − μ_k)ᵀ Σ_k⁻¹ (x − μ_k) + log|Σ_k|` (equal priors).

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::distances::DistanceKind;
use crate::error::{domain, Error, Result};
use crate::estimators::{
    fit_from, tyler_covariance_rescale, Centering, EstimatorConfig, FitStart, GroupedSample, Proposal,
};
use crate::losses::{LossKind, LossSpec};
use crate::modelselect::{cross_validate, CvGrid, CvReport};
use crate::pds::PdsMatrix;

/// Version tag of the JSON model document.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct RdaModel {
    locations: Vec<DVector<f64>>,
    sigmas: Vec<PdsMatrix>,
    log_dets: Vec<f64>,
    /// Additive per-class score offsets; zero means equal priors.
    offsets: Vec<f64>,
    beta: f64,
    proposal: Proposal,
    loss: LossSpec,
    penalty: DistanceKind,
}

/// `(x − μ)ᵀ Σ⁻¹ (x − μ) + log|Σ|`.
pub fn qda_score(x: DVectorView<'_, f64>, mu: &DVector<f64>, sigma: &PdsMatrix) -> Result<f64> {
    if x.len() != sigma.dim() || mu.len() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: x.len().max(mu.len()),
        });
    }
    let d = x - mu;
    Ok(sigma.mahalanobis_sq(d.as_view()) + sigma.log_det())
}

impl RdaModel {
    pub fn new(
        locations: Vec<DVector<f64>>,
        sigmas: Vec<PdsMatrix>,
        beta: f64,
        proposal: Proposal,
        loss: LossSpec,
        penalty: DistanceKind,
    ) -> Result<Self> {
        if sigmas.is_empty() || locations.len() != sigmas.len() {
            return Err(domain("need one location and one scatter matrix per class"));
        }
        let p = sigmas[0].dim();
        for (mu, s) in locations.iter().zip(&sigmas) {
            if mu.len() != p || s.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: if s.dim() != p { s.dim() } else { mu.len() },
                });
            }
        }
        let log_dets = sigmas.iter().map(PdsMatrix::log_det).collect();
        let offsets = vec![0.0; sigmas.len()];
        Ok(Self {
            locations,
            sigmas,
            log_dets,
            offsets,
            beta,
            proposal,
            loss,
            penalty,
        })
    }

    /// Adds per-class offsets to the scores, e.g. `−2 log π_k` for unequal priors.
    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Result<Self> {
        if offsets.len() != self.sigmas.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sigmas.len(),
                got: offsets.len(),
            });
        }
        self.offsets = offsets;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.sigmas[0].dim()
    }

    pub fn num_classes(&self) -> usize {
        self.sigmas.len()
    }

    pub fn locations(&self) -> &[DVector<f64>] {
        &self.locations
    }

    pub fn sigmas(&self) -> &[PdsMatrix] {
        &self.sigmas
    }

    pub fn log_dets(&self) -> &[f64] {
        &self.log_dets
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn proposal(&self) -> Proposal {
        self.proposal
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn penalty(&self) -> DistanceKind {
        self.penalty
    }

    /// Score of `x` under every class.
    pub fn scores(&self, x: DVectorView<'_, f64>) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self
            .locations
            .iter()
            .zip(&self.sigmas)
            .zip(self.log_dets.iter().zip(&self.offsets))
            .map(|((mu, s), (ld, off))| {
                let d = x - mu;
                s.mahalanobis_sq(d.as_view()) + ld + off
            })
            .collect())
    }

    /// Class with the smallest score; ties go to the smaller index.
    pub fn classify(&self, x: DVectorView<'_, f64>) -> Result<usize> {
        let scores = self.scores(x)?;
        let mut best = 0;
        for (k, s) in scores.iter().enumerate() {
            if *s < scores[best] {
                best = k;
            }
        }
        Ok(best)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&ModelDocument::from(self))
            .map_err(|e| Error::Numerical(format!("model serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| domain(format!("invalid model document: {e}")))?;
        doc.into_model()
    }
}

pub fn classify(model: &RdaModel, x: DVectorView<'_, f64>) -> Result<usize> {
    model.classify(x)
}

/// Fraction of test points assigned to a class other than their group.
pub fn misclassification_risk(model: &RdaModel, test: &GroupedSample) -> Result<f64> {
    if test.num_groups() != model.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: model.num_classes(),
            got: test.num_groups(),
        });
    }
    let mut wrong = 0usize;
    for (k, g) in test.groups().iter().enumerate() {
        for row in g.row_iter() {
            let x = row.transpose();
            if model.classify(x.as_view())? != k {
                wrong += 1;
            }
        }
    }
    Ok(wrong as f64 / test.total() as f64)
}

/// Locations used by RDA for a loss: sample means for the Gaussian loss,
/// spatial medians otherwise.
pub fn class_locations(train: &GroupedSample, loss: &LossSpec) -> Result<Vec<DVector<f64>>> {
    let centering = Centering::for_loss(loss);
    train.groups().iter().map(|g| centering.locate(g)).collect()
}

/// Fits class scatter matrices on centered data at a fixed β.
pub fn fit_rda(train: &GroupedSample, config: &EstimatorConfig) -> Result<RdaModel> {
    let locations = class_locations(train, &config.loss)?;
    let centered = train.centered(&locations)?;
    let mut path = fit_centered_path(&centered, &locations, config, &[config.beta]);
    path.pop().expect("one grid value")
}

/// Fits RDA models along a β grid with shared locations, visiting the grid
/// from the largest β down and warm-starting each fit from the previous one.
///
/// Results are returned in grid order.
pub fn fit_rda_path(train: &GroupedSample, config: &EstimatorConfig, betas: &[f64]) -> Result<Vec<Result<RdaModel>>> {
    let locations = class_locations(train, &config.loss)?;
    let centered = train.centered(&locations)?;
    Ok(fit_centered_path(&centered, &locations, config, betas))
}

fn fit_centered_path(
    centered: &GroupedSample,
    locations: &[DVector<f64>],
    config: &EstimatorConfig,
    betas: &[f64],
) -> Vec<Result<RdaModel>> {
    let mut out: Vec<Option<Result<RdaModel>>> = (0..betas.len()).map(|_| None).collect();
    let mut start: Option<FitStart> = None;
    let mut order: Vec<usize> = (0..betas.len()).collect();
    order.sort_by(|&a, &b| betas[b].total_cmp(&betas[a]));
    for i in order {
        let cfg = config.clone().with_beta(betas[i]);
        let result = fit_from(centered, &cfg, start.as_ref()).and_then(|fit| {
            start = Some(fit.as_start());
            let sigmas = rescale_tyler(centered, &cfg, fit.sigmas)?;
            RdaModel::new(locations.to_vec(), sigmas, betas[i], cfg.proposal, cfg.loss, cfg.penalty)
        });
        out[i] = Some(result);
    }
    out.into_iter().map(|r| r.expect("every grid value visited")).collect()
}

fn rescale_tyler(centered: &GroupedSample, config: &EstimatorConfig, sigmas: Vec<PdsMatrix>) -> Result<Vec<PdsMatrix>> {
    if config.proposal == Proposal::Pooled {
        if config.loss.is_tyler() {
            let s = tyler_covariance_rescale(&sigmas[0], &centered.pooled())?;
            return Ok(vec![s; sigmas.len()]);
        }
        return Ok(sigmas);
    }
    sigmas
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            if config.loss_for(k).is_tyler() {
                tyler_covariance_rescale(&s, centered.group(k))
            } else {
                Ok(s)
            }
        })
        .collect()
}

/// Selects β by cross-validation, then fits at the chosen value.
pub fn fit_rda_cv(train: &GroupedSample, template: &EstimatorConfig, grid: &CvGrid) -> Result<(RdaModel, CvReport)> {
    let report = cross_validate(train, template, grid, Centering::for_loss(&template.loss))?;
    let model = fit_rda(train, &template.clone().with_beta(report.chosen_beta))?;
    Ok((model, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    p: usize,
    k: usize,
    beta: f64,
    proposal: Proposal,
    loss: LossKind,
    loss_scale: f64,
    penalty: DistanceKind,
    locations: Vec<Vec<f64>>,
    /// Row-major `p × p` matrices.
    sigmas: Vec<Vec<f64>>,
    log_dets: Vec<f64>,
    offsets: Vec<f64>,
}

impl From<&RdaModel> for ModelDocument {
    fn from(m: &RdaModel) -> Self {
        Self {
            version: MODEL_VERSION,
            p: m.dim(),
            k: m.num_classes(),
            beta: m.beta,
            proposal: m.proposal,
            loss: m.loss.kind(),
            loss_scale: m.loss.b(),
            penalty: m.penalty,
            locations: m.locations.iter().map(|v| v.iter().copied().collect()).collect(),
            sigmas: m
                .sigmas
                .iter()
                .map(|s| s.as_matrix().transpose().iter().copied().collect())
                .collect(),
            log_dets: m.log_dets.clone(),
            offsets: m.offsets.clone(),
        }
    }
}

impl ModelDocument {
    fn into_model(self) -> Result<RdaModel> {
        if self.version != MODEL_VERSION {
            return Err(domain(format!("unsupported model version {}", self.version)));
        }
        let (p, k) = (self.p, self.k);
        if p == 0 || k == 0 || self.locations.len() != k || self.sigmas.len() != k || self.log_dets.len() != k {
            return Err(domain("model document has inconsistent class counts"));
        }
        let mut sigmas = Vec::with_capacity(k);
        for s in &self.sigmas {
            if s.len() != p * p {
                return Err(Error::DimensionMismatch {
                    expected: p * p,
                    got: s.len(),
                });
            }
            sigmas.push(PdsMatrix::new(DMatrix::from_row_slice(p, p, s))?);
        }
        let mut locations = Vec::with_capacity(k);
        for mu in &self.locations {
            if mu.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: mu.len(),
                });
            }
            locations.push(DVector::from_column_slice(mu));
        }
        let loss = match self.loss {
            LossKind::Gaussian => LossSpec::gaussian(p),
            LossKind::Tyler => LossSpec::tyler(p),
            LossKind::TDist { nu } => LossSpec::t_dist(nu, p)?,
            LossKind::Huber { c_sq } => LossSpec::huber_with_threshold(c_sq.sqrt(), p)?,
        }
        .with_scale(self.loss_scale)?;
        let model = RdaModel::new(locations, sigmas, self.beta, self.proposal, loss, self.penalty)?;
        for (stored, fresh) in self.log_dets.iter().zip(&model.log_dets) {
            if (stored - fresh).abs() > 1e-10 * fresh.abs().max(1.0) {
                return Err(domain("stored log-determinants disagree with the matrices"));
            }
        }
        if self.offsets.len() != k {
            return Err(domain("model document has inconsistent class counts"));
        }
        model.with_offsets(self.offsets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn score_examples() {
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let mu = DVector::zeros(2);
        let s = qda_score(x.as_view(), &mu, &PdsMatrix::diagonal(&[4.0, 1.0]).unwrap()).unwrap();
        assert!((s - (0.25 + 4f64.ln())).abs() < 1e-14);
        assert_eq!(qda_score(mu.as_view(), &mu, &PdsMatrix::identity(2)).unwrap(), 0.0);
    }

    #[test]
    fn smaller_scatter_wins_at_shared_center() {
        let m = RdaModel::new(
            vec![DVector::zeros(2), DVector::zeros(2)],
            vec![PdsMatrix::identity(2), PdsMatrix::scaled_identity(2, 4.0)],
            0.5,
            Proposal::Prop1,
            LossSpec::gaussian(2),
            DistanceKind::KullbackLeibler,
        )
        .unwrap();
        assert_eq!(m.classify(DVector::zeros(2).as_view()).unwrap(), 0);
        let scores = m.scores(DVector::zeros(2).as_view()).unwrap();
        assert!((scores[1] - 16f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let data = GroupedSample::new(vec![
            dmatrix![1.0, 0.2; -0.5, 1.1; 0.3, -0.9; -1.2, 0.4],
            dmatrix![5.0, 4.7; 3.5, 5.6; 4.2, 3.3; 6.1, 4.4; 5.5, 5.1],
        ])
        .unwrap();
        let cfg = EstimatorConfig::new(Proposal::Prop2, LossSpec::huber(0.9, 2).unwrap(), 0.37);
        let m = fit_rda(&data, &cfg).unwrap();
        let back = RdaModel::from_json(&m.to_json().unwrap()).unwrap();
        for k in 0..2 {
            assert_eq!(m.sigmas()[k].as_matrix(), back.sigmas()[k].as_matrix());
            assert_eq!(m.locations()[k], back.locations()[k]);
        }
        assert_eq!(m.loss(), back.loss());
        assert_eq!(misclassification_risk(&back, &data).unwrap(), 0.0);
    }
}
