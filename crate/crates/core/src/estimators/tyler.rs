use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pds::PdsMatrix;
use crate::special::chi2_quantile;

use super::scatter::mahalanobis_rows;

/// Largest group the exhaustive subspace search accepts.
pub const EXHAUSTIVE_MAX_N: usize = 20;
const DETERMINISTIC_MAX_N: usize = 25;
const DETERMINISTIC_MAX_SUBSETS: u64 = 5_000;
const RANDOM_SUBSETS: usize = 256;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionMode {
    /// Assume points in general position; verified by rank tests.
    GeneralPosition,
    /// Enumerate every subspace spanned by the data (small `n` only).
    Exhaustive,
}

/// A subspace spanned by data points and how many points it contains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceWitness {
    pub indices: Vec<usize>,
    pub dim: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TylerCondition {
    Holds,
    /// Only the non-strict inequality holds for this subspace.
    Boundary(SubspaceWitness),
    Violated(SubspaceWitness),
    /// A subset of at most `p` points is linearly dependent.
    NotInGeneralPosition(SubspaceWitness),
}

impl TylerCondition {
    pub fn holds(&self) -> bool {
        matches!(self, TylerCondition::Holds)
    }
}

/// Checks `|{xᵢ ∈ V}| / n < dim V / (pβ)` for every subspace `V`; at `β = 1`
/// only proper subspaces count.
///
/// Rows of `group` are the (centered) observations.
pub fn check_tyler_condition(group: &DMatrix<f64>, beta: f64, mode: ConditionMode) -> Result<TylerCondition> {
    let n = group.nrows();
    let p = group.ncols();
    if n == 0 || p == 0 {
        return Err(domain("empty sample"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(domain(format!("beta must lie in [0, 1], got {beta}")));
    }
    let rows: Vec<DVector<f64>> = group.row_iter().map(|r| r.transpose()).collect();
    let zeros: Vec<usize> = (0..n).filter(|&i| rows[i].iter().all(|v| *v == 0.0)).collect();
    if !zeros.is_empty() && beta > 0.0 {
        return Ok(TylerCondition::Violated(SubspaceWitness {
            count: zeros.len(),
            indices: zeros,
            dim: 0,
        }));
    }
    match mode {
        ConditionMode::GeneralPosition => general_position(&rows, p, beta),
        ConditionMode::Exhaustive => exhaustive(&rows, p, beta),
    }
}

enum Cmp {
    Strict,
    Equal,
    Fails,
}

fn compare(count: usize, n: usize, dim: usize, p: usize, beta: f64) -> Cmp {
    let lhs = count as f64 * p as f64 * beta;
    let rhs = dim as f64 * n as f64;
    let slack = 1e-12 * rhs.max(1.0);
    if lhs < rhs - slack {
        Cmp::Strict
    } else if lhs <= rhs + slack {
        Cmp::Equal
    } else {
        Cmp::Fails
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k.min(n));
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

/// Whether the exhaustive search over `n` points in `p` dimensions stays
/// within the subset budget.
pub(crate) fn exhaustive_feasible(n: usize, p: usize) -> bool {
    n <= EXHAUSTIVE_MAX_N && (1..p.min(n + 1)).map(|s| binomial(n, s)).sum::<u64>() <= DETERMINISTIC_MAX_SUBSETS
}

/// Orthonormal basis by modified Gram–Schmidt; `None` if the vectors are dependent.
fn orthonormal_basis(vectors: &[&DVector<f64>]) -> Option<Vec<DVector<f64>>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let norm0 = v.norm();
        let mut w = (*v).clone();
        for q in &basis {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        let norm = w.norm();
        if norm <= RANK_TOL * norm0 || norm == 0.0 {
            return None;
        }
        basis.push(w / norm);
    }
    Some(basis)
}

fn in_span(basis: &[DVector<f64>], x: &DVector<f64>) -> bool {
    let norm0 = x.norm();
    let mut w = x.clone();
    for q in basis {
        let c = q.dot(&w);
        w.axpy(-c, q, 1.0);
    }
    w.norm() <= RANK_TOL * norm0.max(f64::MIN_POSITIVE)
}

/// Advances `idx` to the next k-combination of `0..n`.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in (i + 1)..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn general_position(rows: &[DVector<f64>], p: usize, beta: f64) -> Result<TylerCondition> {
    let n = rows.len();
    let m = n.min(p);
    let dependent = |idx: &[usize]| {
        let vs: Vec<&DVector<f64>> = idx.iter().map(|&i| &rows[i]).collect();
        orthonormal_basis(&vs).is_none()
    };
    let witness = |idx: &[usize]| SubspaceWitness {
        indices: idx.to_vec(),
        dim: m,
        count: m,
    };
    if n <= DETERMINISTIC_MAX_N && binomial(n, m) <= DETERMINISTIC_MAX_SUBSETS {
        let mut idx: Vec<usize> = (0..m).collect();
        loop {
            if dependent(&idx) {
                return Ok(TylerCondition::NotInGeneralPosition(witness(&idx)));
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7e57_ab1e);
        for _ in 0..RANDOM_SUBSETS {
            let mut idx = sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            if dependent(&idx) {
                return Ok(TylerCondition::NotInGeneralPosition(witness(&idx)));
            }
        }
    }
    // In general position the binding subspace is spanned by min(n, p−1) points.
    let d = n.min(p - 1);
    let w = SubspaceWitness {
        indices: (0..d).collect(),
        dim: d,
        count: d,
    };
    if d == 0 {
        return Ok(full_space(n, p, beta));
    }
    Ok(match compare(d, n, d, p, beta) {
        Cmp::Strict => full_space(n, p, beta),
        Cmp::Equal => TylerCondition::Boundary(w),
        Cmp::Fails => TylerCondition::Violated(w),
    })
}

// At β = 1 the whole space always attains equality; the scale is then fixed by normalization.
fn full_space(n: usize, p: usize, beta: f64) -> TylerCondition {
    if beta >= 1.0 {
        return TylerCondition::Holds;
    }
    let w = SubspaceWitness {
        indices: (0..n).collect(),
        dim: p,
        count: n,
    };
    match compare(n, n, p, p, beta) {
        Cmp::Strict => TylerCondition::Holds,
        Cmp::Equal => TylerCondition::Boundary(w),
        Cmp::Fails => TylerCondition::Violated(w),
    }
}

fn exhaustive(rows: &[DVector<f64>], p: usize, beta: f64) -> Result<TylerCondition> {
    let n = rows.len();
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::Precondition(format!(
            "exhaustive check supports at most {EXHAUSTIVE_MAX_N} points, got {n}"
        )));
    }
    let mut boundary: Option<SubspaceWitness> = None;
    let nonzero: Vec<usize> = (0..n).filter(|&i| rows[i].iter().any(|v| *v != 0.0)).collect();
    for s in 1..p.min(nonzero.len() + 1) {
        let mut pos: Vec<usize> = (0..s).collect();
        loop {
            let idx: Vec<usize> = pos.iter().map(|&j| nonzero[j]).collect();
            let vs: Vec<&DVector<f64>> = idx.iter().map(|&i| &rows[i]).collect();
            if let Some(basis) = orthonormal_basis(&vs) {
                let count = rows.iter().filter(|x| in_span(&basis, x)).count();
                let w = SubspaceWitness {
                    indices: idx,
                    dim: s,
                    count,
                };
                match compare(count, n, s, p, beta) {
                    Cmp::Strict => {}
                    Cmp::Equal => {
                        boundary.get_or_insert(w);
                    }
                    Cmp::Fails => return Ok(TylerCondition::Violated(w)),
                }
            }
            if !next_combination(&mut pos, nonzero.len()) {
                break;
            }
        }
    }
    match full_space(n, p, beta) {
        TylerCondition::Violated(w) => Ok(TylerCondition::Violated(w)),
        TylerCondition::Boundary(w) => Ok(TylerCondition::Boundary(boundary.unwrap_or(w))),
        _ => Ok(boundary.map_or(TylerCondition::Holds, TylerCondition::Boundary)),
    }
}

/// Rescales a shape estimate so that the median Mahalanobis distance matches
/// the Gaussian median: `b = median(xᵀΣ⁻¹x) / F⁻¹_{χ²_p}(1/2)`.
pub fn tyler_covariance_rescale(sigma: &PdsMatrix, group: &DMatrix<f64>) -> Result<PdsMatrix> {
    if group.nrows() == 0 {
        return Err(domain("rescaling needs at least one observation"));
    }
    if group.ncols() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: group.ncols(),
        });
    }
    let mut t = mahalanobis_rows(group, sigma);
    t.sort_by(f64::total_cmp);
    let n = t.len();
    let median = if n % 2 == 1 {
        t[n / 2]
    } else {
        0.5 * (t[n / 2 - 1] + t[n / 2])
    };
    let dof = u32::try_from(sigma.dim()).map_err(|_| domain("dimension too large"))?;
    let b = median / chi2_quantile(0.5, dof)?;
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Numerical(format!("degenerate rescaling factor {b}")));
    }
    sigma.scale(b)
}
