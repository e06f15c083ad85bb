use nalgebra::{DMatrix, DVector};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::losses::{LossKind, LossSpec};

pub const SPATIAL_MEDIAN_MAX_ITER: usize = 10_000;
/// Gradient tolerance of the spatial median, per observation.
pub const SPATIAL_MEDIAN_TOL: f64 = 1e-10;

/// How group locations are estimated before scatter estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Data are used as given.
    None,
    SampleMean,
    SpatialMedian,
}

impl Centering {
    /// Sample mean for the Gaussian loss, spatial median for robust losses.
    pub fn for_loss(loss: &LossSpec) -> Self {
        match loss.kind() {
            LossKind::Gaussian => Centering::SampleMean,
            _ => Centering::SpatialMedian,
        }
    }

    pub fn locate(&self, points: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self {
            Centering::None => Ok(DVector::zeros(points.ncols())),
            Centering::SampleMean => sample_mean(points),
            Centering::SpatialMedian => spatial_median(points, SPATIAL_MEDIAN_TOL * points.nrows().max(1) as f64),
        }
    }
}

/// Column means of an `n × p` sample.
pub fn sample_mean(points: &DMatrix<f64>) -> Result<DVector<f64>> {
    if points.nrows() == 0 {
        return Err(domain("mean of an empty sample"));
    }
    Ok(points.row_mean().transpose())
}

/// Minimizer of `Σ ‖xᵢ − μ‖`, by Weiszfeld iterations with the
/// Vardi–Zhang correction at data points.
///
/// Stops once the gradient norm of the objective drops below `tol`, or a data
/// point satisfies the subgradient optimality condition.
pub fn spatial_median(points: &DMatrix<f64>, tol: f64) -> Result<DVector<f64>> {
    let n = points.nrows();
    if n == 0 {
        return Err(domain("median of an empty sample"));
    }
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    if n == 1 {
        return Ok(points.row(0).transpose());
    }
    let p = points.ncols();
    let rows: Vec<DVector<f64>> = points.row_iter().map(|r| r.transpose()).collect();
    let scale = rows.iter().map(|r| r.amax()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let coincide = 1e-13 * scale;

    let mut y = sample_mean(points)?;
    for _ in 0..SPATIAL_MEDIAN_MAX_ITER {
        let mut num = DVector::zeros(p);
        let mut den = 0.0;
        let mut r = DVector::zeros(p);
        let mut eta = 0usize;
        for x in &rows {
            let d = x - &y;
            let dist = d.norm();
            if dist <= coincide {
                eta += 1;
                continue;
            }
            num.axpy(1.0 / dist, x, 1.0);
            den += 1.0 / dist;
            r.axpy(1.0 / dist, &d, 1.0);
        }
        let r_norm = r.norm();
        if eta == 0 && r_norm < tol {
            return Ok(y);
        }
        if eta > 0 && r_norm <= eta as f64 {
            return Ok(y);
        }
        if den == 0.0 {
            return Ok(y);
        }
        let t = num / den;
        let next = if eta == 0 {
            t
        } else {
            let gamma = (eta as f64 / r_norm).min(1.0);
            t * (1.0 - gamma) + &y * gamma
        };

        // Weiszfeld slows down near a data-point minimizer; test the nearest one.
        if let Some(j) = nearest(&rows, &next) {
            if point_is_optimal(&rows, j, coincide) {
                return Ok(rows[j].clone());
            }
        }
        let step = (&next - &y).norm();
        y = next;
        if step <= 1e-15 * scale {
            return Ok(y);
        }
    }
    log::warn!("spatial median reached {SPATIAL_MEDIAN_MAX_ITER} iterations");
    Ok(y)
}

fn nearest(rows: &[DVector<f64>], y: &DVector<f64>) -> Option<usize> {
    rows.iter()
        .map(|x| (x - y).norm_squared())
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(j, _)| j)
}

fn point_is_optimal(rows: &[DVector<f64>], j: usize, coincide: f64) -> bool {
    let xj = &rows[j];
    let mut r = DVector::zeros(xj.len());
    let mut eta = 0usize;
    for x in rows {
        let d = x - xj;
        let dist = d.norm();
        if dist <= coincide {
            eta += 1;
        } else {
            r.axpy(1.0 / dist, &d, 1.0);
        }
    }
    r.norm() <= eta as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn collinear_median_is_middle_point() {
        let x = dmatrix![0.0; 1.0; 10.0];
        let m = spatial_median(&x, 1e-10).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_configuration() {
        let x = dmatrix![1.0, 0.0; -1.0, 0.0; 0.0, 1.0; 0.0, -1.0];
        let m = spatial_median(&x, 1e-12).unwrap();
        assert!(m.norm() < 1e-12);
    }

    #[test]
    fn triangle_fermat_point() {
        // Equilateral triangle: the median is the centroid.
        let h = 3f64.sqrt() / 2.0;
        let x = dmatrix![0.0, 0.0; 1.0, 0.0; 0.5, h];
        let m = spatial_median(&x, 1e-12).unwrap();
        assert!((m[0] - 0.5).abs() < 1e-9 && (m[1] - h / 3.0).abs() < 1e-9);
    }

    #[test]
    fn resists_outliers() {
        let x = dmatrix![0.0, 0.0; 0.1, 0.0; 0.0, 0.1; -0.1, 0.0; 1000.0, 1000.0];
        let m = spatial_median(&x, 1e-10).unwrap();
        assert!(m.norm() < 0.2);
        assert!(sample_mean(&x).unwrap().norm() > 100.0);
    }
}
