//! Method names such as `Prop1(H,KL)`, `LDA` or `Oracle2`.

use std::fmt;
use std::str::FromStr;

use jointshrink_core::distances::DistanceKind;
use jointshrink_core::estimators::{EstimatorConfig, Proposal};
use jointshrink_core::losses::{LossSpec, DEFAULT_HUBER_QUANTILE};
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossFamily {
    Gaussian,
    Huber,
    Tyler,
}

impl LossFamily {
    pub fn letter(&self) -> char {
        match self {
            LossFamily::Gaussian => 'G',
            LossFamily::Huber => 'H',
            LossFamily::Tyler => 'T',
        }
    }

    /// Loss at dimension `p`; Huber uses the 0.9 chi-square quantile threshold.
    pub fn spec(&self, p: usize) -> SimResult<LossSpec> {
        Ok(match self {
            LossFamily::Gaussian => LossSpec::gaussian(p),
            LossFamily::Huber => LossSpec::huber(DEFAULT_HUBER_QUANTILE, p)?,
            LossFamily::Tyler => LossSpec::tyler(p),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodTag {
    /// QDA with the true locations and scatter matrices.
    Oracle1,
    /// QDA with the true scatter matrices and estimated locations.
    Oracle2,
    Lda,
    Qda,
    Rda {
        proposal: Proposal,
        loss: LossFamily,
        penalty: DistanceKind,
    },
}

impl MethodTag {
    pub const fn rda(proposal: Proposal, loss: LossFamily, penalty: DistanceKind) -> Self {
        MethodTag::Rda { proposal, loss, penalty }
    }

    /// Estimator configuration for the estimated rules; `None` for the oracles.
    pub fn config(&self, p: usize) -> SimResult<Option<EstimatorConfig>> {
        Ok(match self {
            MethodTag::Oracle1 | MethodTag::Oracle2 => None,
            MethodTag::Lda => Some(EstimatorConfig::new(Proposal::Pooled, LossSpec::gaussian(p), 1.0)),
            MethodTag::Qda => Some(EstimatorConfig::new(Proposal::Prop1, LossSpec::gaussian(p), 1.0)),
            MethodTag::Rda { proposal, loss, penalty } => {
                Some(EstimatorConfig::new(*proposal, loss.spec(p)?, 0.5).with_penalty(*penalty))
            }
        })
    }

    pub fn is_rda(&self) -> bool {
        matches!(self, MethodTag::Rda { .. })
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodTag::Oracle1 => write!(f, "Oracle1"),
            MethodTag::Oracle2 => write!(f, "Oracle2"),
            MethodTag::Lda => write!(f, "LDA"),
            MethodTag::Qda => write!(f, "QDA"),
            MethodTag::Rda { proposal, loss, penalty } => {
                write!(f, "{}({},{})", proposal.tag(), loss.letter(), penalty.tag())
            }
        }
    }
}

impl FromStr for MethodTag {
    type Err = SimError;

    /// Accepts `I` as a synonym of `KL`.
    fn from_str(s: &str) -> SimResult<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match compact.to_ascii_lowercase().as_str() {
            "oracle1" => return Ok(MethodTag::Oracle1),
            "oracle2" => return Ok(MethodTag::Oracle2),
            "lda" => return Ok(MethodTag::Lda),
            "qda" => return Ok(MethodTag::Qda),
            _ => {}
        }
        let bad = || SimError::Spec(format!("unknown method '{s}'"));
        let (head, rest) = compact.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let (loss, penalty) = args.split_once(',').ok_or_else(bad)?;
        let proposal = match head.to_ascii_lowercase().as_str() {
            "prop1" => Proposal::Prop1,
            "prop2" => Proposal::Prop2,
            _ => return Err(bad()),
        };
        let loss = match loss {
            "G" => LossFamily::Gaussian,
            "H" => LossFamily::Huber,
            "T" => LossFamily::Tyler,
            _ => return Err(bad()),
        };
        let penalty = match penalty {
            "KL" | "I" => DistanceKind::KullbackLeibler,
            "E" => DistanceKind::Ellipticity,
            _ => return Err(bad()),
        };
        Ok(MethodTag::Rda { proposal, loss, penalty })
    }
}

/// Parses a comma-free list of method names, e.g. from a CLI flag.
pub fn parse_methods(names: &[&str]) -> SimResult<Vec<MethodTag>> {
    names.iter().map(|n| n.parse()).collect()
}

use DistanceKind::{Ellipticity as E, KullbackLeibler as KL};
use LossFamily::{Gaussian as G, Huber as H, Tyler as T};
use Proposal::{Prop1, Prop2};

/// Rows of the simulation tables, in table order.
pub const SIMULATION_METHODS: [MethodTag; 11] = [
    MethodTag::Oracle1,
    MethodTag::Oracle2,
    MethodTag::Qda,
    MethodTag::Lda,
    MethodTag::rda(Prop1, G, KL),
    MethodTag::rda(Prop1, H, KL),
    MethodTag::rda(Prop1, T, E),
    MethodTag::rda(Prop2, G, E),
    MethodTag::rda(Prop2, T, E),
    MethodTag::rda(Prop2, H, E),
    MethodTag::rda(Prop2, H, KL),
];

/// Rows of the IRIS table, in table order.
pub const IRIS_METHODS: [MethodTag; 9] = [
    MethodTag::Lda,
    MethodTag::Qda,
    MethodTag::rda(Prop1, G, KL),
    MethodTag::rda(Prop1, T, E),
    MethodTag::rda(Prop1, H, E),
    MethodTag::rda(Prop1, H, KL),
    MethodTag::rda(Prop2, T, E),
    MethodTag::rda(Prop2, H, E),
    MethodTag::rda(Prop2, H, KL),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in SIMULATION_METHODS.iter().chain(IRIS_METHODS.iter()) {
            assert_eq!(m.to_string().parse::<MethodTag>().unwrap(), *m);
        }
        assert_eq!("Prop2(H,I)".parse::<MethodTag>().unwrap(), MethodTag::rda(Prop2, H, KL));
        assert!("Prop3(H,KL)".parse::<MethodTag>().is_err());
        assert!("Prop1(X,KL)".parse::<MethodTag>().is_err());
    }
}
