use nalgebra::{DMatrix, DVector};

use crate::distances::Weights;
use crate::error::{domain, Error, Result};

/// `K` groups of `p`-dimensional observations, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    p: usize,
    groups: Vec<DMatrix<f64>>,
    weights: Weights,
}

impl GroupedSample {
    /// Each matrix holds one group as `n_k × p`.
    pub fn new(groups: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = groups.first().ok_or_else(|| domain("at least one group is required"))?;
        let p = first.ncols();
        if p == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        for (k, g) in groups.iter().enumerate() {
            if g.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: g.ncols(),
                });
            }
            if g.nrows() == 0 {
                return Err(domain(format!("group {k} is empty")));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(domain(format!("group {k} has non-finite values")));
            }
        }
        let sizes: Vec<usize> = groups.iter().map(|g| g.nrows()).collect();
        let weights = Weights::from_counts(&sizes)?;
        Ok(Self { p, groups, weights })
    }

    /// Builds groups from nested point lists.
    pub fn from_points(groups: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut mats = Vec::with_capacity(groups.len());
        for (k, g) in groups.iter().enumerate() {
            let p = g.first().map(Vec::len).ok_or_else(|| domain(format!("group {k} is empty")))?;
            if g.iter().any(|x| x.len() != p) {
                return Err(domain(format!("group {k} has ragged rows")));
            }
            mats.push(DMatrix::from_fn(g.len(), p, |i, j| g[i][j]));
        }
        Self::new(mats)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, k: usize) -> &DMatrix<f64> {
        &self.groups[k]
    }

    pub fn groups(&self) -> &[DMatrix<f64>] {
        &self.groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.nrows()).collect()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.nrows()).sum()
    }

    /// `π_k = n_k / N`.
    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// All observations stacked in group order.
    pub fn pooled(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.total(), self.p);
        let mut row = 0;
        for g in &self.groups {
            out.rows_mut(row, g.nrows()).copy_from(g);
            row += g.nrows();
        }
        out
    }

    /// Maps every observation `x ↦ C x`.
    pub fn transformed(&self, c: &DMatrix<f64>) -> Result<Self> {
        if c.nrows() != self.p || c.ncols() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: c.nrows(),
            });
        }
        Self::new(self.groups.iter().map(|g| g * c.transpose()).collect())
    }

    /// Subtracts a location vector from every observation of each group.
    pub fn centered(&self, locations: &[DVector<f64>]) -> Result<Self> {
        if locations.len() != self.groups.len() {
            return Err(Error::DimensionMismatch {
                expected: self.groups.len(),
                got: locations.len(),
            });
        }
        let mut out = Vec::with_capacity(self.groups.len());
        for (g, mu) in self.groups.iter().zip(locations) {
            if mu.len() != self.p {
                return Err(Error::DimensionMismatch {
                    expected: self.p,
                    got: mu.len(),
                });
            }
            let mut c = g.clone();
            for mut row in c.row_iter_mut() {
                for j in 0..self.p {
                    row[j] -= mu[j];
                }
            }
            out.push(c);
        }
        Self::new(out)
    }

    /// Keeps the listed rows of each group.
    pub fn subset(&self, rows: &[Vec<usize>]) -> Result<Self> {
        if rows.len() != self.groups.len() {
            return Err(Error::DimensionMismatch {
                expected: self.groups.len(),
                got: rows.len(),
            });
        }
        let groups = self
            .groups
            .iter()
            .zip(rows)
            .map(|(g, idx)| g.select_rows(idx.iter()))
            .collect();
        Self::new(groups)
    }
}
