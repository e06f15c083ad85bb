//! Squared extrapolation (SQUAREM) for monotone fixed-point maps on tuples of
//! positive definite matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pds::PdsMatrix;

/// Largest extrapolation length tried.
const MAX_STEP: f64 = 1e4;

pub(crate) struct Outcome {
    pub state: Vec<PdsMatrix>,
    /// Number of fixed-point map evaluations.
    pub evaluations: usize,
    pub residual: f64,
    pub trace: Vec<f64>,
}

/// Largest relative Frobenius change over the components.
pub(crate) fn residual(next: &[PdsMatrix], prev: &[PdsMatrix]) -> f64 {
    next.iter().zip(prev).map(|(a, b)| a.relative_change(b)).fold(0.0, f64::max)
}

fn diff_norm_sq(a: &[PdsMatrix], b: &[PdsMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.as_matrix() - y.as_matrix()).norm_squared()).sum()
}

/// `x0 − 2α r + α² v` with `r = x1 − x0` and `v = x2 − 2 x1 + x0`; `None` if
/// any component leaves the cone.
fn extrapolate(x0: &[PdsMatrix], x1: &[PdsMatrix], x2: &[PdsMatrix], alpha: f64) -> Option<Vec<PdsMatrix>> {
    x0.iter()
        .zip(x1)
        .zip(x2)
        .map(|((a, b), c)| {
            let (a, b, c) = (a.as_matrix(), b.as_matrix(), c.as_matrix());
            let r: DMatrix<f64> = b - a;
            let v: DMatrix<f64> = c - b * 2.0 + a;
            PdsMatrix::symmetrized(a - r * (2.0 * alpha) + v * (alpha * alpha)).ok()
        })
        .collect()
}

/// Iterates `map` until the relative change of one plain step drops below
/// `tol`. An extrapolated point is kept only if, after one stabilizing step,
/// its objective does not exceed the objective at the start of the cycle, so
/// the recorded objective never increases.
pub(crate) fn squarem(
    start: Vec<PdsMatrix>,
    mut map: impl FnMut(&[PdsMatrix]) -> Result<Vec<PdsMatrix>>,
    mut objective: impl FnMut(&[PdsMatrix]) -> Result<f64>,
    tol: f64,
    max_evals: usize,
    what: &str,
) -> Result<Outcome> {
    let mut x0 = start;
    let mut f0 = objective(&x0)?;
    let mut trace = vec![f0];
    let mut evaluations = 0;
    let mut res = f64::INFINITY;
    let done = |state: Vec<PdsMatrix>, evaluations, residual, mut trace: Vec<f64>, f: f64| {
        trace.push(f);
        Ok(Outcome {
            state,
            evaluations,
            residual,
            trace,
        })
    };
    while evaluations < max_evals {
        let x1 = map(&x0)?;
        evaluations += 1;
        res = residual(&x1, &x0);
        if res < tol {
            let f = objective(&x1)?;
            return done(x1, evaluations, res, trace, f);
        }
        if evaluations == max_evals {
            break;
        }
        let x2 = map(&x1)?;
        evaluations += 1;
        res = residual(&x2, &x1);
        let f2 = objective(&x2)?;
        if res < tol {
            return done(x2, evaluations, res, trace, f2);
        }
        let r = diff_norm_sq(&x1, &x0).sqrt();
        let v: f64 = x0
            .iter()
            .zip(&x1)
            .zip(&x2)
            .map(|((a, b), c)| (c.as_matrix() - b.as_matrix() * 2.0 + a.as_matrix()).norm_squared())
            .sum::<f64>()
            .sqrt();
        let alpha = if v > 0.0 { (-r / v).clamp(-MAX_STEP, -1.0) } else { -1.0 };
        let mut next = (x2, f2);
        if alpha < -1.0 && evaluations < max_evals {
            if let Some(xp) = extrapolate(&x0, &x1, &next.0, alpha) {
                evaluations += 1;
                if let Ok(xq) = map(&xp) {
                    if let Ok(fq) = objective(&xq) {
                        if fq <= f0 {
                            next = (xq, fq);
                        }
                    }
                }
            }
        }
        x0 = next.0;
        f0 = next.1;
        trace.push(f0);
    }
    Err(Error::Numerical(format!(
        "{what} did not converge in {max_evals} cycles (residual {res:e})"
    )))
}
