//! Monte Carlo misclassification experiments on simulated elliptical classes.

use jointshrink_core::estimators::{Centering, EstimatorConfig, GroupedSample};
use jointshrink_core::pds::PdsMatrix;
use jointshrink_core::rda::{fit_rda, fit_rda_path, misclassification_risk, RdaModel};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::methods::MethodTag;
use crate::sampling::{multinomial_sizes, sample_gaussian, sample_t, substream, Stream};
use crate::stats::MeanStd;

/// Solver tolerance used inside experiments.
pub const EXPERIMENT_TOL: f64 = 1e-6;
/// Smallest class size accepted in a simulated training set.
pub const MIN_GROUP_SIZE: usize = 3;
/// Largest tolerated share of redrawn trials.
pub const MAX_REDRAW_RATE: f64 = 0.01;

/// The β grid `0.01, 0.03, …, 0.49, 0.55, 0.60, …, 0.90`.
pub fn beta_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..25).map(|i| (1 + 2 * i) as f64 / 100.0).collect();
    grid.extend((0..8).map(|i| (55 + 5 * i) as f64 / 100.0));
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// `Σ_k = k I`.
    UnequalSpherical,
    /// `Σ_k = I`.
    EqualSpherical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Gaussian,
    /// Elliptical t with two degrees of freedom.
    T2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub family: Family,
    pub k: usize,
    pub p: usize,
    pub n_total: usize,
    pub probs: Vec<f64>,
    pub betas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl ExperimentSpec {
    /// Standard design: `N = 100`, class probabilities `(1/4, 1/4, 1/2)` for
    /// `K = 3` and `(1/6, 1/6, 1/6, 1/4, 1/4)` for `K = 5`.
    pub fn standard(scenario: Scenario, family: Family, k: usize, p: usize, trials: usize, seed: u64) -> SimResult<Self> {
        let probs = match k {
            3 => vec![0.25, 0.25, 0.5],
            5 => vec![1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.25, 0.25],
            _ => return Err(SimError::Spec(format!("no standard class probabilities for K = {k}"))),
        };
        let spec = Self {
            scenario,
            family,
            k,
            p,
            n_total: 100,
            probs,
            betas: beta_grid(),
            trials,
            seed,
            tol: EXPERIMENT_TOL,
            max_iter: 5000,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> SimResult<()> {
        if self.k < 2 || self.probs.len() != self.k {
            return Err(SimError::Spec("need K ≥ 2 and one probability per class".into()));
        }
        if self.k - 1 > self.p {
            return Err(SimError::Spec("orthogonal mean directions need K − 1 ≤ p".into()));
        }
        if (self.probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SimError::Spec("class probabilities must sum to 1".into()));
        }
        if self.trials == 0 || self.betas.is_empty() {
            return Err(SimError::Spec("need at least one trial and one grid value".into()));
        }
        Ok(())
    }

    /// `μ_1 = 0` and `μ_k = δ_k e_{k−1}`, with `δ_k = δ + k − 2` in the unequal
    /// scenario and `δ_k = δ` otherwise; `δ` is 3 (Gaussian) or 4 (t₂).
    pub fn means(&self) -> Vec<DVector<f64>> {
        (1..=self.k)
            .map(|k| {
                let mut mu = DVector::zeros(self.p);
                if k > 1 {
                    let base = match self.family {
                        Family::Gaussian => 3.0,
                        Family::T2 => 4.0,
                    };
                    mu[k - 2] = match self.scenario {
                        Scenario::UnequalSpherical => base + k as f64 - 2.0,
                        Scenario::EqualSpherical => base,
                    };
                }
                mu
            })
            .collect()
    }

    pub fn scatters(&self) -> Vec<PdsMatrix> {
        (1..=self.k)
            .map(|k| match self.scenario {
                Scenario::UnequalSpherical => PdsMatrix::scaled_identity(self.p, k as f64),
                Scenario::EqualSpherical => PdsMatrix::identity(self.p),
            })
            .collect()
    }

    fn sample(&self, sizes: &[usize], stream: Stream, index: u64) -> SimResult<GroupedSample> {
        let mut rng = substream(self.seed, stream, index);
        let groups = self
            .means()
            .iter()
            .zip(self.scatters())
            .zip(sizes)
            .map(|((mu, sigma), &n)| match self.family {
                Family::Gaussian => sample_gaussian(mu, &sigma, n, &mut rng),
                Family::T2 => sample_t(mu, &sigma, 2.0, n, &mut rng),
            })
            .collect::<SimResult<Vec<_>>>()?;
        Ok(GroupedSample::new(groups)?)
    }

    fn oracle_centering(&self) -> Centering {
        match self.family {
            Family::Gaussian => Centering::SampleMean,
            Family::T2 => Centering::SpatialMedian,
        }
    }
}

/// Summary of one method over all trials, risks in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub trials: usize,
    /// Mean selected β for RDA rules.
    pub mean_beta: Option<f64>,
    /// Why the cell is empty, if it is.
    pub absent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub rows: Vec<MethodSummary>,
    /// Class-size draws rejected by the minimum-size rule.
    pub size_redraws: usize,
    /// Trials redrawn after a solver failure.
    pub failure_redraws: usize,
}

struct TrialOutcome {
    /// Per method: risk in percent and, for RDA, the selected β.
    results: Vec<Option<(f64, Option<f64>)>>,
}

fn draw_sizes(spec: &ExperimentSpec, trial: u64, size_redraws: &mut usize) -> SimResult<Vec<usize>> {
    let mut rng = substream(spec.seed, Stream::Sizes, trial);
    for _ in 0..10_000 {
        let sizes = multinomial_sizes(spec.n_total, &spec.probs, &mut rng)?;
        if sizes.iter().all(|&n| n >= MIN_GROUP_SIZE) {
            return Ok(sizes);
        }
        *size_redraws += 1;
        log::info!("trial {trial}: class sizes {sizes:?} below {MIN_GROUP_SIZE}, redrawing");
    }
    Err(SimError::Spec("class sizes never met the minimum-size rule".into()))
}

fn configure(spec: &ExperimentSpec, base: EstimatorConfig) -> EstimatorConfig {
    base.with_tol(spec.tol).with_max_iter(spec.max_iter)
}

fn run_trial(spec: &ExperimentSpec, methods: &[MethodTag], index: u64, qda_ok: bool) -> SimResult<TrialOutcome> {
    let mut unused = 0;
    let sizes = draw_sizes(spec, index, &mut unused)?;
    let train = spec.sample(&sizes, Stream::Train, index)?;
    let test = spec.sample(&sizes, Stream::Test, index)?;
    let scatters = spec.scatters();
    let mut results = Vec::with_capacity(methods.len());
    for method in methods {
        let outcome = match method {
            MethodTag::Oracle1 | MethodTag::Oracle2 => {
                let locations = if *method == MethodTag::Oracle1 {
                    spec.means()
                } else {
                    let c = spec.oracle_centering();
                    train.groups().iter().map(|g| c.locate(g)).collect::<Result<Vec<_>, _>>()?
                };
                let cfg = configure(spec, method_config(&MethodTag::Qda, spec.p)?);
                let model = RdaModel::new(locations, scatters.clone(), 1.0, cfg.proposal, cfg.loss, cfg.penalty)?;
                Some((100.0 * misclassification_risk(&model, &test)?, None))
            }
            MethodTag::Qda if !qda_ok => None,
            MethodTag::Lda | MethodTag::Qda => {
                let cfg = configure(spec, method_config(method, spec.p)?);
                let model = fit_rda(&train, &cfg)?;
                Some((100.0 * misclassification_risk(&model, &test)?, None))
            }
            MethodTag::Rda { .. } => {
                let cfg = configure(spec, method_config(method, spec.p)?);
                let path = fit_rda_path(&train, &cfg, &spec.betas)?;
                let mut best: Option<(f64, f64)> = None;
                let mut last_error = None;
                for (beta, model) in spec.betas.iter().zip(path) {
                    match model {
                        Ok(m) => {
                            let risk = 100.0 * misclassification_risk(&m, &test)?;
                            if best.is_none_or(|(r, _)| risk < r) {
                                best = Some((risk, *beta));
                            }
                        }
                        Err(e) => {
                            log::debug!("{method} at beta={beta}: {e}");
                            last_error = Some(e);
                        }
                    }
                }
                match (best, last_error) {
                    (Some((risk, beta)), _) => Some((risk, Some(beta))),
                    (None, Some(e)) => return Err(e.into()),
                    (None, None) => None,
                }
            }
        };
        results.push(outcome);
    }
    Ok(TrialOutcome { results })
}

fn method_config(method: &MethodTag, p: usize) -> SimResult<EstimatorConfig> {
    method
        .config(p)?
        .ok_or_else(|| SimError::Spec(format!("{method} has no estimator configuration")))
}

/// Runs every trial, redrawing trials whose fits fail.
///
/// For RDA rules the per-trial risk is the smallest over the β grid (ties to
/// the smaller β). QDA is reported absent when any training class has at
/// most `p` observations.
pub fn run_experiment(spec: &ExperimentSpec, methods: &[MethodTag]) -> SimResult<ExperimentReport> {
    spec.validate()?;
    let mut size_redraws = 0;
    let mut sizes_per_trial = Vec::with_capacity(spec.trials);
    for t in 0..spec.trials {
        sizes_per_trial.push(draw_sizes(spec, trial_index(t, 0), &mut size_redraws)?);
    }
    let mut qda_ok = sizes_per_trial.iter().all(|s| s.iter().all(|&n| n > spec.p));

    let mut acc: Vec<MeanStd> = vec![MeanStd::default(); methods.len()];
    let mut beta_acc: Vec<MeanStd> = vec![MeanStd::default(); methods.len()];
    let mut failure_redraws = 0;
    let limit = (MAX_REDRAW_RATE * spec.trials as f64).floor() as usize;
    for t in 0..spec.trials {
        let mut attempt = 0;
        let outcome = loop {
            let index = trial_index(t, attempt);
            if attempt > 0 {
                let mut extra = 0;
                let sizes = draw_sizes(spec, index, &mut extra)?;
                size_redraws += extra;
                qda_ok &= sizes.iter().all(|&n| n > spec.p);
            }
            match run_trial(spec, methods, index, qda_ok) {
                Ok(o) => break o,
                Err(e) => {
                    failure_redraws += 1;
                    log::warn!("trial {t} attempt {attempt} failed, redrawing: {e}");
                    if failure_redraws > limit {
                        return Err(SimError::RedrawLimit {
                            redraws: failure_redraws,
                            trials: spec.trials,
                            limit: 100.0 * MAX_REDRAW_RATE,
                            last_error: e.to_string(),
                        });
                    }
                    attempt += 1;
                }
            }
        };
        for (m, r) in outcome.results.iter().enumerate() {
            if let Some((risk, beta)) = r {
                acc[m].push(*risk);
                if let Some(b) = beta {
                    beta_acc[m].push(*b);
                }
            }
        }
    }

    let rows = methods
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let absent = (*method == MethodTag::Qda && !qda_ok)
                .then(|| format!("some training class has n_k ≤ p = {}", spec.p));
            let present = absent.is_none() && acc[m].count() > 0;
            MethodSummary {
                method: method.to_string(),
                mean: present.then(|| acc[m].mean()),
                std: present.then(|| acc[m].std()),
                trials: if present { acc[m].count() } else { 0 },
                mean_beta: (beta_acc[m].count() > 0).then(|| beta_acc[m].mean()),
                absent,
            }
        })
        .collect();
    Ok(ExperimentReport {
        spec: spec.clone(),
        rows,
        size_redraws,
        failure_redraws,
    })
}

/// Substream index of a trial attempt; attempt 0 is the original draw.
fn trial_index(trial: usize, attempt: usize) -> u64 {
    ((attempt as u64) << 32) | trial as u64
}

/// Training sample of a trial's first draw.
pub fn trial_training_sample(spec: &ExperimentSpec, trial: usize) -> SimResult<GroupedSample> {
    let mut unused = 0;
    let sizes = draw_sizes(spec, trial_index(trial, 0), &mut unused)?;
    spec.sample(&sizes, Stream::Train, trial_index(trial, 0))
}
