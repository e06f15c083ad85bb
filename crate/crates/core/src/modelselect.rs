//! Cross-validation of the shrinkage parameter `β` over a grid.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimators::{fit_from, Centering, EstimatorConfig, FitResult, FitStart, GroupedSample};
use crate::pds::PdsMatrix;

/// Default number of folds.
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldSpec {
    /// `Q` folds formed within each group.
    KFold(usize),
    /// One fold per observation.
    LeaveOneOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub betas: Vec<f64>,
    pub folds: FoldSpec,
    pub seed: u64,
}

impl CvGrid {
    pub fn new(betas: Vec<f64>, folds: FoldSpec, seed: u64) -> Result<Self> {
        if betas.is_empty() {
            return Err(domain("the beta grid is empty"));
        }
        if betas.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return Err(domain("grid values must lie in (0, 1]"));
        }
        if betas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("grid values must be strictly increasing"));
        }
        if let FoldSpec::KFold(q) = folds {
            if q < 2 {
                return Err(domain(format!("need at least 2 folds, got {q}")));
            }
        }
        Ok(Self { betas, folds, seed })
    }
}

/// Held-out indices: `folds[q][k]` lists the rows of group `k` left out in fold `q`.
pub type Folds = Vec<Vec<Vec<usize>>>;

/// Splits every group into folds whose sizes differ by at most one.
///
/// K-fold assignment shuffles each group with its own seeded stream and cuts
/// the permutation into contiguous blocks, larger blocks first.
pub fn make_folds(data: &GroupedSample, folds: FoldSpec, seed: u64) -> Result<Folds> {
    let sizes = data.sizes();
    match folds {
        FoldSpec::LeaveOneOut => {
            let mut out = Vec::with_capacity(data.total());
            for (k, &n) in sizes.iter().enumerate() {
                for i in 0..n {
                    let mut fold = vec![Vec::new(); sizes.len()];
                    fold[k].push(i);
                    out.push(fold);
                }
            }
            Ok(out)
        }
        FoldSpec::KFold(q) => {
            if q < 2 {
                return Err(domain(format!("need at least 2 folds, got {q}")));
            }
            if let Some((k, n)) = sizes.iter().enumerate().find(|(_, n)| **n < q) {
                return Err(domain(format!("group {k} has {n} observations, fewer than {q} folds")));
            }
            let mut out: Folds = vec![vec![Vec::new(); sizes.len()]; q];
            for (k, &n) in sizes.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let (base, extra) = (n / q, n % q);
                let mut start = 0;
                for (j, fold) in out.iter_mut().enumerate() {
                    let len = base + usize::from(j < extra);
                    let mut idx = perm[start..start + len].to_vec();
                    idx.sort_unstable();
                    fold[k] = idx;
                    start += len;
                }
            }
            Ok(out)
        }
    }
}

/// `Σ_k {Σ_x ρ_k(xᵀΣ̂_k⁻¹x) + m_k log|Σ̂_k|}` over held-out points, `m_k` of them in group `k`.
pub fn cv_fit(heldout: &[DMatrix<f64>], sigmas: &[PdsMatrix], config: &EstimatorConfig) -> Result<f64> {
    if heldout.len() != sigmas.len() {
        return Err(Error::DimensionMismatch {
            expected: sigmas.len(),
            got: heldout.len(),
        });
    }
    let mut total = 0.0;
    for (k, (x, sigma)) in heldout.iter().zip(sigmas).enumerate() {
        if x.nrows() == 0 {
            continue;
        }
        if x.ncols() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                got: x.ncols(),
            });
        }
        let loss = config.loss_for(k);
        let inv = sigma.inverse_matrix();
        for row in x.row_iter() {
            let t = (row * inv).dot(&row);
            total += loss.rho(t.max(0.0))?;
        }
        total += x.nrows() as f64 * sigma.log_det();
    }
    Ok(total)
}

/// One failed `(β, fold)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvFailure {
    pub beta: f64,
    pub fold: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub betas: Vec<f64>,
    /// Mean CV fit per β over its valid folds; `None` when every fold failed.
    pub cv_curve: Vec<Option<f64>>,
    /// `per_fold[i][q]` for `betas[i]` and fold `q`.
    pub per_fold: Vec<Vec<Option<f64>>>,
    pub chosen_beta: f64,
    pub failures: Vec<CvFailure>,
}

/// Training and held-out parts of one fold, centered with training locations.
pub(crate) struct FoldData {
    pub train: GroupedSample,
    pub heldout: Vec<DMatrix<f64>>,
}

pub(crate) fn split_fold(data: &GroupedSample, heldout: &[Vec<usize>], centering: Centering) -> Result<FoldData> {
    let mut train_rows = Vec::with_capacity(data.num_groups());
    for (k, out) in heldout.iter().enumerate() {
        let n = data.group(k).nrows();
        let mut mask = vec![true; n];
        for &i in out {
            mask[i] = false;
        }
        train_rows.push((0..n).filter(|&i| mask[i]).collect::<Vec<_>>());
    }
    let raw = data.subset(&train_rows)?;
    let locations = raw
        .groups()
        .iter()
        .map(|g| centering.locate(g))
        .collect::<Result<Vec<_>>>()?;
    let train = raw.centered(&locations)?;
    let heldout = heldout
        .iter()
        .zip(&locations)
        .enumerate()
        .map(|(k, (idx, mu))| {
            let mut x = data.group(k).select_rows(idx.iter());
            for mut row in x.row_iter_mut() {
                for j in 0..mu.len() {
                    row[j] -= mu[j];
                }
            }
            x
        })
        .collect();
    Ok(FoldData { train, heldout })
}

/// Fits `template` at every grid value on every fold and picks the β with the
/// smallest mean CV fit, ties going to the smaller β.
///
/// Locations are re-estimated from the training part of each fold. Within a
/// fold the grid is visited from the largest β down, each fit warm-started
/// from the previous one.
pub fn cross_validate(
    data: &GroupedSample,
    template: &EstimatorConfig,
    grid: &CvGrid,
    centering: Centering,
) -> Result<CvReport> {
    let folds = make_folds(data, grid.folds, grid.seed)?;
    let nb = grid.betas.len();
    let mut per_fold = vec![vec![None; folds.len()]; nb];
    let mut failures = Vec::new();

    for (q, heldout) in folds.iter().enumerate() {
        let fold = match split_fold(data, heldout, centering) {
            Ok(f) => f,
            Err(e) => {
                for &beta in &grid.betas {
                    failures.push(CvFailure {
                        beta,
                        fold: q,
                        message: e.to_string(),
                    });
                }
                continue;
            }
        };
        let mut start: Option<FitStart> = None;
        for i in (0..nb).rev() {
            let beta = grid.betas[i];
            let config = template.clone().with_beta(beta);
            let score = fit_from(&fold.train, &config, start.as_ref())
                .and_then(|fit: FitResult| {
                    let s = cv_fit(&fold.heldout, &fit.sigmas, &config)?;
                    start = Some(fit.as_start());
                    Ok(s)
                })
                .and_then(|s| {
                    if s.is_finite() {
                        Ok(s)
                    } else {
                        Err(Error::Numerical(format!("non-finite CV fit {s}")))
                    }
                });
            match score {
                Ok(s) => per_fold[i][q] = Some(s),
                Err(e) => {
                    log::warn!("CV cell beta={beta} fold={q} excluded: {e}");
                    failures.push(CvFailure {
                        beta,
                        fold: q,
                        message: e.to_string(),
                    });
                }
            }
        }
    }

    let cv_curve: Vec<Option<f64>> = per_fold
        .iter()
        .map(|row| {
            let valid: Vec<f64> = row.iter().flatten().copied().collect();
            (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64)
        })
        .collect();
    let mut chosen: Option<(f64, f64)> = None;
    for (beta, value) in grid.betas.iter().zip(&cv_curve) {
        if let Some(v) = value {
            if chosen.is_none_or(|(_, best)| *v < best) {
                chosen = Some((*beta, *v));
            }
        }
    }
    let (chosen_beta, _) = chosen.ok_or_else(|| {
        Error::Numerical(format!(
            "every cross-validation cell failed; first error: {}",
            failures.first().map_or("none", |f| f.message.as_str())
        ))
    })?;
    Ok(CvReport {
        betas: grid.betas.clone(),
        cv_curve,
        per_fold,
        chosen_beta,
        failures,
    })
}
