//! Validation-error experiment on Fisher's IRIS data with injected outliers.

use jointshrink_core::estimators::GroupedSample;
use jointshrink_core::modelselect::{CvGrid, FoldSpec, DEFAULT_FOLDS};
use jointshrink_core::rda::{fit_rda, fit_rda_cv, misclassification_risk};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::experiment::{beta_grid, EXPERIMENT_TOL, MAX_REDRAW_RATE};
use crate::methods::MethodTag;
use crate::sampling::{substream, Stream};
use crate::stats::MeanStd;

const IRIS_CSV: &str = include_str!("../data/iris.csv");

/// The 150 × 4 IRIS measurements as three classes of 50.
pub fn iris() -> GroupedSample {
    let mut groups: Vec<Vec<Vec<f64>>> = vec![Vec::new(); 3];
    for line in IRIS_CSV.lines().skip(1).filter(|l| !l.is_empty()) {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().expect("embedded data is numeric")).collect();
        groups[fields[4] as usize].push(fields[..4].to_vec());
    }
    GroupedSample::from_points(&groups).expect("embedded data is well formed")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrisSpec {
    /// Training/validation sizes per class.
    pub splits: Vec<(usize, usize)>,
    pub repetitions: usize,
    pub folds: usize,
    pub betas: Vec<f64>,
    pub outliers_per_group: usize,
    /// Outliers are `ζ (1, …, 1)` with `ζ ~ U(0, amplitude)`.
    pub outlier_amplitude: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl IrisSpec {
    /// Splits 30/20, 25/25, 15/35 and 10/40, two outliers per training class,
    /// 5-fold CV over the standard β grid.
    pub fn standard(repetitions: usize, seed: u64) -> Self {
        Self {
            splits: vec![(30, 20), (25, 25), (15, 35), (10, 40)],
            repetitions,
            folds: DEFAULT_FOLDS,
            betas: beta_grid(),
            outliers_per_group: 2,
            outlier_amplitude: 1024.0,
            seed,
            tol: EXPERIMENT_TOL,
            max_iter: 5000,
        }
    }

    pub fn validate(&self) -> SimResult<()> {
        if self.repetitions == 0 || self.splits.is_empty() {
            return Err(SimError::Spec("need at least one repetition and one split".into()));
        }
        for &(t, v) in &self.splits {
            if t + v > 50 || t == 0 || v == 0 {
                return Err(SimError::Spec(format!("invalid split {t}/{v} of 50 per class")));
            }
            if self.outliers_per_group > t || t < self.folds {
                return Err(SimError::Spec(format!("split {t}/{v} is too small for the outlier and fold settings")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrisRow {
    pub method: String,
    /// Mean validation error in percent, one entry per split.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Mean CV-selected β per split for RDA rules.
    pub mean_beta: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrisReport {
    pub spec: IrisSpec,
    pub rows: Vec<IrisRow>,
    pub failure_redraws: usize,
}

impl IrisReport {
    pub fn split_labels(&self) -> Vec<String> {
        self.spec.splits.iter().map(|(t, v)| format!("{t}/{v}")).collect()
    }

    pub fn row(&self, method: &str) -> Option<&IrisRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// One contaminated training set and its validation set.
pub fn iris_partition(spec: &IrisSpec, split: usize, index: u64) -> SimResult<(GroupedSample, GroupedSample)> {
    let data = iris();
    let (t, _) = spec.splits[split];
    let stream_index = ((split as u64) << 40) | index;
    let mut rng = substream(spec.seed, Stream::Split, stream_index);
    let mut out_rng = substream(spec.seed, Stream::Outliers, stream_index);
    let v_total = spec.splits[split].1;
    let mut train = Vec::with_capacity(3);
    let mut valid = Vec::with_capacity(3);
    for g in data.groups() {
        let mut idx: Vec<usize> = (0..g.nrows()).collect();
        idx.shuffle(&mut rng);
        let mut tr = g.select_rows(idx[..t].iter());
        for row in sample(&mut out_rng, t, spec.outliers_per_group) {
            let zeta: f64 = out_rng.random_range(0.0..spec.outlier_amplitude);
            tr.row_mut(row).fill(zeta);
        }
        train.push(tr);
        valid.push(g.select_rows(idx[t..t + v_total].iter()));
    }
    Ok((GroupedSample::new(train)?, GroupedSample::new(valid)?))
}

fn run_repetition(
    spec: &IrisSpec,
    methods: &[MethodTag],
    split: usize,
    index: u64,
) -> SimResult<Vec<(f64, Option<f64>)>> {
    let (train, valid) = iris_partition(spec, split, index)?;
    let p = train.dim();
    let fold_seed: u64 = substream(spec.seed, Stream::Folds, ((split as u64) << 40) | index).random();
    let grid = CvGrid::new(spec.betas.clone(), FoldSpec::KFold(spec.folds), fold_seed)?;
    let mut out = Vec::with_capacity(methods.len());
    for method in methods {
        let cfg = method
            .config(p)?
            .ok_or_else(|| SimError::Spec(format!("{method} is not available for the IRIS experiment")))?
            .with_tol(spec.tol)
            .with_max_iter(spec.max_iter);
        let (model, beta) = if method.is_rda() {
            let (m, report) = fit_rda_cv(&train, &cfg, &grid)?;
            (m, Some(report.chosen_beta))
        } else {
            (fit_rda(&train, &cfg)?, None)
        };
        out.push((100.0 * misclassification_risk(&model, &valid)?, beta));
    }
    Ok(out)
}

/// Mean validation error per method and split over random partitions.
pub fn run_iris(spec: &IrisSpec, methods: &[MethodTag]) -> SimResult<IrisReport> {
    spec.validate()?;
    let ns = spec.splits.len();
    let mut acc = vec![vec![MeanStd::default(); ns]; methods.len()];
    let mut beta_acc = vec![vec![MeanStd::default(); ns]; methods.len()];
    let mut failure_redraws = 0;
    let limit = (MAX_REDRAW_RATE * (spec.repetitions * ns) as f64).floor() as usize;
    for split in 0..ns {
        for rep in 0..spec.repetitions {
            let mut attempt = 0u64;
            let results = loop {
                match run_repetition(spec, methods, split, (attempt << 24) | rep as u64) {
                    Ok(r) => break r,
                    Err(e) => {
                        failure_redraws += 1;
                        log::warn!("IRIS split {split} repetition {rep} failed, redrawing: {e}");
                        if failure_redraws > limit {
                            return Err(SimError::RedrawLimit {
                                redraws: failure_redraws,
                                trials: spec.repetitions * ns,
                                limit: 100.0 * MAX_REDRAW_RATE,
                                last_error: e.to_string(),
                            });
                        }
                        attempt += 1;
                    }
                }
            };
            for (m, (err, beta)) in results.into_iter().enumerate() {
                acc[m][split].push(err);
                if let Some(b) = beta {
                    beta_acc[m][split].push(b);
                }
            }
        }
    }
    let rows = methods
        .iter()
        .enumerate()
        .map(|(m, method)| IrisRow {
            method: method.to_string(),
            mean: acc[m].iter().map(MeanStd::mean).collect(),
            std: acc[m].iter().map(MeanStd::std).collect(),
            mean_beta: beta_acc[m].iter().map(|b| (b.count() > 0).then(|| b.mean())).collect(),
        })
        .collect();
    Ok(IrisReport {
        spec: spec.clone(),
        rows,
        failure_redraws,
    })
}
