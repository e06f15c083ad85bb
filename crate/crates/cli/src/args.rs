use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use jointshrink_core::distances::DistanceKind;
use jointshrink_core::estimators::{Centering, EstimatorConfig, Proposal, DEFAULT_MAX_ITER, DEFAULT_TOL};
use jointshrink_core::losses::{LossSpec, DEFAULT_HUBER_QUANTILE};
use jointshrink_core::modelselect::{FoldSpec, DEFAULT_FOLDS};

use crate::error::{input, CliResult};

#[derive(Debug, Parser)]
#[command(name = "jointshrink", version, about = "Jointly shrunk scatter matrices and regularized discriminant analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate group scatter matrices and their center at one β.
    Estimate(EstimateArgs),
    /// Cross-validate β over a grid.
    Cv(CvArgs),
    /// Fit an RDA model, selecting β by cross-validation unless --beta is given.
    RdaTrain(TrainArgs),
    /// Classify rows with a fitted RDA model.
    RdaPredict(PredictArgs),
    /// Rerun the simulation or IRIS experiments.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// CSV with a header, numeric feature columns and a `group` column.
    #[arg(long)]
    pub input: PathBuf,
    /// gaussian, t:<nu>, huber[:<q>] or tyler.
    #[arg(long, default_value = "gaussian")]
    pub loss: String,
    #[arg(long, value_enum, default_value_t = PenaltyArg::Kl)]
    pub penalty: PenaltyArg,
    #[arg(long, value_enum, default_value_t = ProposalArg::Prop2)]
    pub proposal: ProposalArg,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Location removed from each group before estimation; `auto` uses the
    /// sample mean for the Gaussian loss and the spatial median otherwise.
    #[arg(long, value_enum, default_value_t = CenterArg::Auto)]
    pub center: CenterArg,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Comma-separated β values; defaults to the standard 33-point grid.
    #[arg(long, value_delimiter = ',')]
    pub beta_grid: Option<Vec<f64>>,
    /// Number of folds, or `loo` for leave-one-out.
    #[arg(long, default_value_t = DEFAULT_FOLDS.to_string())]
    pub folds: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t = CenterArg::Auto)]
    pub center: CenterArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fixed β; skips cross-validation.
    #[arg(long, conflicts_with = "beta_grid")]
    pub beta: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file written by rda-train.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with the model's feature columns; a `group` column is optional.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub table: TableArg,
    /// Trials per cell, or repetitions for the IRIS table.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Restrict the simulation tables to these class counts.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Restrict the simulation tables to these dimensions.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<usize>>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PenaltyArg {
    Kl,
    Ellipticity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProposalArg {
    Pooled,
    Prop1,
    Prop2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CenterArg {
    Auto,
    None,
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableArg {
    /// Unequal spherical scatter matrices.
    Table1,
    /// Identical spherical scatter matrices.
    Table2,
    /// IRIS data with injected outliers.
    Table3,
}

impl CenterArg {
    pub fn centering(self, loss: &LossSpec) -> Centering {
        match self {
            CenterArg::Auto => Centering::for_loss(loss),
            CenterArg::None => Centering::None,
            CenterArg::Mean => Centering::SampleMean,
            CenterArg::Median => Centering::SpatialMedian,
        }
    }
}

pub fn parse_loss(text: &str, p: usize) -> CliResult<LossSpec> {
    let bad = |why: String| input(format!("--loss '{text}': {why}"));
    let (name, param) = match text.split_once(':') {
        Some((n, v)) => (n, Some(v)),
        None => (text, None),
    };
    let number = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
    let loss = match (name.to_ascii_lowercase().as_str(), param) {
        ("gaussian", None) => Ok(LossSpec::gaussian(p)),
        ("tyler", None) => Ok(LossSpec::tyler(p)),
        ("t", Some(v)) => LossSpec::t_dist(number(v)?, p),
        ("huber", None) => LossSpec::huber(DEFAULT_HUBER_QUANTILE, p),
        ("huber", Some(v)) => LossSpec::huber(number(v)?, p),
        _ => return Err(bad("expected gaussian, t:<nu>, huber[:<q>] or tyler".into())),
    };
    loss.map_err(|e| bad(e.to_string()))
}

pub fn parse_folds(text: &str) -> CliResult<FoldSpec> {
    if text.eq_ignore_ascii_case("loo") {
        return Ok(FoldSpec::LeaveOneOut);
    }
    text.parse()
        .map(FoldSpec::KFold)
        .map_err(|_| input(format!("--folds '{text}': expected a fold count or 'loo'")))
}

impl ModelArgs {
    pub fn config(&self, p: usize, beta: f64) -> CliResult<EstimatorConfig> {
        let loss = parse_loss(&self.loss, p)?;
        let proposal = match self.proposal {
            ProposalArg::Pooled => Proposal::Pooled,
            ProposalArg::Prop1 => Proposal::Prop1,
            ProposalArg::Prop2 => Proposal::Prop2,
        };
        let penalty = match self.penalty {
            PenaltyArg::Kl => DistanceKind::KullbackLeibler,
            PenaltyArg::Ellipticity => DistanceKind::Ellipticity,
        };
        if !(self.tol > 0.0) {
            return Err(input(format!("--tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(input("--max-iter must be positive"));
        }
        Ok(EstimatorConfig::new(proposal, loss, beta)
            .with_penalty(penalty)
            .with_tol(self.tol)
            .with_max_iter(self.max_iter))
    }
}
