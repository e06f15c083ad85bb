//! Dense symmetric and symmetric positive-definite (SPD) matrices.
//!
//! Every SPD value carries its eigendecomposition, computed once at
//! construction with cyclic Jacobi rotations. Matrix functions (powers,
//! logarithm, inverse, log-determinant) are then evaluated spectrally.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{domain, Error, Result};

/// Relative symmetry tolerance accepted by the checked constructors.
const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest admissible ratio between the extreme eigenvalues of an SPD matrix.
const PD_RATIO: f64 = 1e-12;
/// Sweep cap for the Jacobi eigensolver.
const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// Rebuilds `U diag(f(d)) Uᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &d) in self.values.iter().enumerate() {
            let fd = f(d);
            for i in 0..n {
                scaled[(i, j)] *= fd;
            }
        }
        let out = &scaled * self.vectors.transpose();
        symmetrize(out)
    }
}

/// Cyclic Jacobi eigensolver for a symmetric matrix.
fn jacobi(a: &DMatrix<f64>) -> Result<SymEigen> {
    let n = a.nrows();
    // Row-major scratch copies; the matrix is symmetric so layout is moot for `m`.
    let mut m: Vec<f64> = a.iter().copied().collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = n <= 1 || total == 0.0;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi eigensolver did not converge within {MAX_SWEEPS} sweeps"
            )));
        }
        sweep += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 4 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = m[r * n + p];
                        let arq = m[r * n + q];
                        let new_rp = c * arp - s * arq;
                        let new_rq = s * arp + c * arq;
                        m[r * n + p] = new_rp;
                        m[p * n + r] = new_rp;
                        m[r * n + q] = new_rq;
                        m[q * n + r] = new_rq;
                    }
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * m[p * n + q] * m[p * n + q];
            }
        }
        converged = off.sqrt() <= f64::EPSILON * 1e-2 * total || off == 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let values: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(SymEigen { values, vectors })
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(domain(format!(
            "matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(domain("matrix dimension must be at least 1"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(domain("matrix has non-finite entries"));
    }
    let scale = m.amax();
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(domain(format!("matrix is not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// A real symmetric matrix, used for intermediate results such as matrix logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    mat: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&mat)?;
        Ok(Self {
            mat: symmetrize(mat),
        })
    }

    /// Averages `m` with its transpose; no symmetry check.
    pub fn symmetrized(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(domain("matrix must be square and non-empty"));
        }
        Ok(Self {
            mat: symmetrize(mat),
        })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            mat: DMatrix::zeros(p, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn eig(&self) -> Result<SymEigen> {
        jacobi(&self.mat)
    }

    /// Matrix exponential, which is always SPD.
    pub fn exp(&self) -> Result<PdsMatrix> {
        let eig = self.eig()?;
        let values: Vec<f64> = eig.values.iter().map(|d| d.exp()).collect();
        PdsMatrix::from_eigen(values, eig.vectors)
    }

    /// Converts to an SPD matrix if it is one.
    pub fn to_pds(&self) -> Result<PdsMatrix> {
        PdsMatrix::new(self.mat.clone())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }
}

/// A symmetric positive-definite matrix with its cached eigendecomposition.
#[derive(Debug, Clone)]
pub struct PdsMatrix {
    mat: DMatrix<f64>,
    eig: SymEigen,
    inverse: OnceLock<DMatrix<f64>>,
}

impl PartialEq for PdsMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl PdsMatrix {
    /// Certifies `mat` as SPD. Rejects asymmetric input and matrices whose
    /// smallest eigenvalue is not above `1e-12` times the largest.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&mat)?;
        Self::certify(symmetrize(mat))
    }

    /// Like [`PdsMatrix::new`] but first averages `mat` with its transpose.
    /// Meant for products such as `A^{1/2} B A^{1/2}` that are symmetric only
    /// up to rounding.
    pub fn symmetrized(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(domain("matrix must be square and non-empty"));
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotPositiveDefinite("non-finite entries".into()));
        }
        Self::certify(symmetrize(mat))
    }

    fn certify(mat: DMatrix<f64>) -> Result<Self> {
        let eig = jacobi(&mat)?;
        let max = eig.values[0];
        let min = *eig.values.last().expect("non-empty");
        if !(max > 0.0) || !(min > PD_RATIO * max) {
            return Err(Error::NotPositiveDefinite(format!(
                "eigenvalue range [{min:e}, {max:e}]"
            )));
        }
        Ok(Self {
            mat,
            eig,
            inverse: OnceLock::new(),
        })
    }

    /// Builds `U diag(values) Uᵀ` from a known decomposition.
    pub fn from_eigen(values: Vec<f64>, vectors: DMatrix<f64>) -> Result<Self> {
        let n = values.len();
        if n == 0 || vectors.nrows() != n || vectors.ncols() != n {
            return Err(domain("eigenvector matrix does not match eigenvalue count"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
        let values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
        let max = values[0];
        let min = values[n - 1];
        if !max.is_finite() || !(max > 0.0) || !(min > PD_RATIO * max) {
            return Err(Error::NotPositiveDefinite(format!(
                "eigenvalue range [{min:e}, {max:e}]"
            )));
        }
        let eig = SymEigen { values, vectors };
        let mat = eig.map(|d| d);
        Ok(Self {
            mat,
            eig,
            inverse: OnceLock::new(),
        })
    }

    pub fn identity(p: usize) -> Self {
        Self::scaled_identity(p, 1.0)
    }

    /// `s·I`; panics unless `s > 0` and `p ≥ 1`.
    pub fn scaled_identity(p: usize, s: f64) -> Self {
        assert!(p >= 1 && s > 0.0 && s.is_finite());
        Self {
            mat: DMatrix::from_diagonal_element(p, p, s),
            eig: SymEigen {
                values: vec![s; p],
                vectors: DMatrix::identity(p, p),
            },
            inverse: OnceLock::new(),
        }
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }

    pub fn eigen(&self) -> &SymEigen {
        &self.eig
    }

    /// Cached `A⁻¹` as a plain matrix.
    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        self.inverse.get_or_init(|| self.eig.map(|d| 1.0 / d))
    }

    pub fn inverse(&self) -> PdsMatrix {
        self.power(-1.0)
    }

    pub fn log_det(&self) -> f64 {
        self.eig.values.iter().map(|d| d.ln()).sum()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }

    /// `A^t` evaluated on the spectrum.
    pub fn power(&self, t: f64) -> PdsMatrix {
        if t == 1.0 {
            return self.clone();
        }
        let values: Vec<f64> = self.eig.values.iter().map(|d| d.powf(t)).collect();
        let vectors = self.eig.vectors.clone();
        let eig = SymEigen { values, vectors };
        let mat = eig.map(|d| d);
        PdsMatrix {
            mat,
            eig,
            inverse: OnceLock::new(),
        }
    }

    pub fn sqrt(&self) -> PdsMatrix {
        self.power(0.5)
    }

    pub fn inv_sqrt(&self) -> PdsMatrix {
        self.power(-0.5)
    }

    /// Principal matrix logarithm.
    pub fn log(&self) -> SymMatrix {
        SymMatrix {
            mat: self.eig.map(f64::ln),
        }
    }

    /// `c·A` for `c > 0`.
    pub fn scale(&self, c: f64) -> Result<PdsMatrix> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(domain(format!("scale factor must be positive, got {c}")));
        }
        let eig = SymEigen {
            values: self.eig.values.iter().map(|d| d * c).collect(),
            vectors: self.eig.vectors.clone(),
        };
        let inverse = OnceLock::new();
        if let Some(inv) = self.inverse.get() {
            let _ = inverse.set(inv / c);
        }
        Ok(PdsMatrix {
            mat: &self.mat * c,
            eig,
            inverse,
        })
    }

    /// Rescales so that `Tr(A) = p`.
    pub fn trace_normalized(&self) -> PdsMatrix {
        let c = self.dim() as f64 / self.trace();
        self.scale(c).expect("trace of an SPD matrix is positive")
    }

    /// `C A Cᵀ` for a nonsingular `C`.
    pub fn congruence(&self, c: &DMatrix<f64>) -> Result<PdsMatrix> {
        if c.nrows() != self.dim() || c.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: c.nrows(),
            });
        }
        PdsMatrix::symmetrized(c * &self.mat * c.transpose())
    }

    /// Squared Mahalanobis length `xᵀ A⁻¹ x`.
    pub fn mahalanobis_sq(&self, x: DVectorView<'_, f64>) -> f64 {
        let inv = self.inverse_matrix();
        (inv * x).dot(&x)
    }

    /// `Tr(A⁻¹ B)`.
    pub fn trace_inv_product(&self, other: &PdsMatrix) -> f64 {
        self.inverse_matrix().component_mul(&other.mat).sum()
    }

    /// Relative Frobenius distance `‖A − B‖_F / ‖B‖_F`.
    pub fn relative_change(&self, previous: &PdsMatrix) -> f64 {
        (&self.mat - &previous.mat).norm() / previous.mat.norm()
    }
}

/// Eigendecomposition with eigenvalues sorted in descending order.
pub fn sym_eig(a: &SymMatrix) -> Result<SymEigen> {
    a.eig()
}

/// `A^t` for SPD `A`; `t = 0` gives the identity and `t = −1` the inverse.
pub fn matrix_power(a: &PdsMatrix, t: f64) -> PdsMatrix {
    a.power(t)
}

pub fn matrix_log(a: &PdsMatrix) -> SymMatrix {
    a.log()
}

/// Point at parameter `t ∈ [0, 1]` on the affine-invariant geodesic from `a` to `b`:
/// `A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}`.
pub fn geodesic_point(a: &PdsMatrix, b: &PdsMatrix, t: f64) -> Result<PdsMatrix> {
    if !(0.0..=1.0).contains(&t) {
        return Err(domain(format!("geodesic parameter must lie in [0,1], got {t}")));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    let half = a.sqrt();
    let inv_half = a.inv_sqrt();
    let inner = PdsMatrix::symmetrized(inv_half.as_matrix() * b.as_matrix() * inv_half.as_matrix())?;
    let moved = inner.power(t);
    PdsMatrix::symmetrized(half.as_matrix() * moved.as_matrix() * half.as_matrix())
}
