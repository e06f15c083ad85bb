use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::losses::LossSpec;
use crate::pds::{PdsMatrix, SymMatrix};

/// Sample scatter about `center`: `(1/n) Σ (x − μ)(x − μ)ᵀ`.
///
/// May be rank deficient; callers that need an SPD matrix convert explicitly.
pub fn scm(group: &DMatrix<f64>, center: &DVector<f64>) -> Result<SymMatrix> {
    if group.nrows() == 0 {
        return Err(domain("scatter needs at least one observation"));
    }
    if center.len() != group.ncols() {
        return Err(Error::DimensionMismatch {
            expected: group.ncols(),
            got: center.len(),
        });
    }
    let mut c = group.clone();
    for mut row in c.row_iter_mut() {
        for j in 0..center.len() {
            row[j] -= center[j];
        }
    }
    SymMatrix::symmetrized(c.tr_mul(&c) / group.nrows() as f64)
}

/// `xᵢᵀ Σ⁻¹ xᵢ` for every row.
pub(crate) fn mahalanobis_rows(group: &DMatrix<f64>, sigma: &PdsMatrix) -> Vec<f64> {
    let y = group * sigma.inverse_matrix();
    y.row_iter()
        .zip(group.row_iter())
        .map(|(a, b)| a.dot(&b))
        .collect()
}

/// `(1/n) Σ wᵢ xᵢ xᵢᵀ`.
pub(crate) fn weighted_outer(group: &DMatrix<f64>, weights: impl Iterator<Item = f64>) -> DMatrix<f64> {
    let n = group.nrows() as f64;
    let mut scaled = group.clone();
    for (mut row, w) in scaled.row_iter_mut().zip(weights) {
        row *= w / n;
    }
    let mut out = group.tr_mul(&scaled);
    let p = out.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    out
}

pub(crate) fn check_tyler_rows(group: &DMatrix<f64>) -> Result<()> {
    if let Some(i) = group.row_iter().position(|r| r.iter().all(|v| *v == 0.0)) {
        return Err(domain(format!(
            "Tyler loss is undefined at a zero observation (row {i})"
        )));
    }
    Ok(())
}

/// `Ψ(Σ) = (1/n) Σ u(xᵀΣ⁻¹x) x xᵀ` for pre-centered observations.
pub fn weighted_scatter(group: &DMatrix<f64>, sigma: &PdsMatrix, loss: &LossSpec) -> Result<SymMatrix> {
    if group.ncols() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: group.ncols(),
        });
    }
    if group.nrows() == 0 {
        return Err(domain("scatter needs at least one observation"));
    }
    if loss.is_tyler() {
        check_tyler_rows(group)?;
    }
    let t = mahalanobis_rows(group, sigma);
    let m = weighted_outer(group, t.iter().map(|&t| loss.weight_unchecked(t)));
    SymMatrix::symmetrized(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn scm_examples() {
        let single = dmatrix![1.5, -2.0];
        let s = scm(&single, &DVector::from_vec(vec![1.5, -2.0])).unwrap();
        assert_eq!(s.as_matrix(), &DMatrix::zeros(2, 2));

        let pm = dmatrix![1.0, 0.0; -1.0, 0.0];
        let s = scm(&pm, &DVector::zeros(2)).unwrap();
        assert_eq!(s.as_matrix(), &dmatrix![1.0, 0.0; 0.0, 0.0]);

        let x = dmatrix![1.0, 2.0; 3.0, 0.0; -1.0, 1.0; 0.5, 0.5];
        let mean = x.row_mean().transpose();
        let s = scm(&x, &mean).unwrap();
        let mut manual = DMatrix::zeros(2, 2);
        for r in x.row_iter() {
            let d = r.transpose() - &mean;
            manual += &d * d.transpose();
        }
        manual /= 4.0;
        assert!((s.as_matrix() - manual).amax() < 1e-14);
    }

    #[test]
    fn gaussian_weighted_scatter_is_scm() {
        let x = dmatrix![1.0, 2.0; 3.0, 0.0; -1.0, 1.0];
        let sigma = PdsMatrix::new(dmatrix![2.0, 0.1; 0.1, 1.0]).unwrap();
        let w = weighted_scatter(&x, &sigma, &LossSpec::gaussian(2)).unwrap();
        let s = scm(&x, &DVector::zeros(2)).unwrap();
        assert!((w.as_matrix() - s.as_matrix()).amax() < 1e-14);
    }

    #[test]
    fn tyler_single_point() {
        let x = dmatrix![3.0, 4.0];
        let w = weighted_scatter(&x, &PdsMatrix::identity(2), &LossSpec::tyler(2)).unwrap();
        let expected = dmatrix![9.0, 12.0; 12.0, 16.0] * (2.0 / 25.0);
        assert!((w.as_matrix() - expected).amax() < 1e-14);
        let zero = dmatrix![0.0, 0.0; 1.0, 1.0];
        assert!(matches!(
            weighted_scatter(&zero, &PdsMatrix::identity(2), &LossSpec::tyler(2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn huber_inside_threshold_is_scaled_scm() {
        let loss = LossSpec::huber(0.9, 2).unwrap();
        let x = dmatrix![0.1, 0.2; -0.3, 0.1; 0.2, -0.2];
        let w = weighted_scatter(&x, &PdsMatrix::identity(2), &loss).unwrap();
        let s = scm(&x, &DVector::zeros(2)).unwrap();
        assert!((w.as_matrix() - s.as_matrix() / loss.b()).amax() < 1e-14);
    }
}
