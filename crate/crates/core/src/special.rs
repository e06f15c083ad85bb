//! Chi-square distribution functions and the quadrature they rely on.

use crate::error::{domain, Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, ~1e-15 relative).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Regularized incomplete gamma pair `(P(a,x), Q(a,x))`.
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise.
fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        let tiny = f64::MIN_POSITIVE / f64::EPSILON;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp().min(1.0);
        (1.0 - q, q)
    }
}

fn check_dof(dof: u32) -> Result<f64> {
    if dof == 0 {
        return Err(domain("chi-square degrees of freedom must be positive"));
    }
    Ok(f64::from(dof))
}

/// `F_{χ²_dof}(x) = P(dof/2, x/2)`.
pub fn chi2_cdf(x: f64, dof: u32) -> Result<f64> {
    let k = check_dof(dof)?;
    if !(x >= 0.0) {
        return Err(domain(format!("chi-square argument must be non-negative, got {x}")));
    }
    Ok(gamma_pq(0.5 * k, 0.5 * x).0)
}

/// Upper tail `1 − F_{χ²_dof}(x)` without cancellation.
pub fn chi2_sf(x: f64, dof: u32) -> Result<f64> {
    let k = check_dof(dof)?;
    if !(x >= 0.0) {
        return Err(domain(format!("chi-square argument must be non-negative, got {x}")));
    }
    Ok(gamma_pq(0.5 * k, 0.5 * x).1)
}

/// Density of `χ²_dof` at `x ≥ 0`.
pub fn chi2_pdf(x: f64, dof: u32) -> f64 {
    let k = f64::from(dof);
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return match dof {
            1 => f64::INFINITY,
            2 => 0.5,
            _ => 0.0,
        };
    }
    let half = 0.5 * k;
    ((half - 1.0) * x.ln() - 0.5 * x - half * std::f64::consts::LN_2 - ln_gamma(half)).exp()
}

/// Quantile function of `χ²_dof` for `q ∈ (0, 1)`.
pub fn chi2_quantile(q: f64, dof: u32) -> Result<f64> {
    check_dof(dof)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("quantile level must lie in (0,1), got {q}")));
    }
    // Work on whichever tail is smaller to keep the residual well conditioned.
    let upper = q > 0.5;
    let target = if upper { 1.0 - q } else { q };
    let resid = |x: f64| -> f64 {
        let (p, s) = gamma_pq(0.5 * f64::from(dof), 0.5 * x);
        if upper {
            target - s
        } else {
            p - target
        }
    };
    let mut lo = 0.0;
    let mut hi = f64::from(dof).max(1.0);
    while resid(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical("chi-square quantile bracket overflow".into()));
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let r = resid(x);
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = chi2_pdf(x, dof);
        let newton = x - r / dens;
        let next = if dens > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 5_000;
    let (v, e) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > rel_tol * total.abs() && err > 1e-300 {
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Numerical(format!(
                "quadrature did not reach relative tolerance {rel_tol:e} (error estimate {err:e})"
            )));
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
        total = pieces.iter().map(|p| p.2).sum();
        err = pieces.iter().map(|p| p.3).sum();
    }
    if !total.is_finite() {
        return Err(Error::Numerical("quadrature produced a non-finite value".into()));
    }
    Ok(total)
}

/// Integral of `f` over `[0, ∞)` through the map `x = s / (1 − s)`.
pub fn integrate_half_line(f: impl Fn(f64) -> f64, rel_tol: f64) -> Result<f64> {
    integrate(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - s;
            let x = s / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rel_tol,
    )
}

/// `E[g(χ²_dof)]` by quadrature against the chi-square density.
pub fn chi2_expectation(g: impl Fn(f64) -> f64, dof: u32, rel_tol: f64) -> Result<f64> {
    check_dof(dof)?;
    integrate_half_line(|x| g(x) * chi2_pdf(x, dof), rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-13);
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-13);
        assert_relative_eq!(ln_gamma(0.1), 2.252_712_651_734_206, epsilon = 1e-12);
    }

    #[test]
    fn cdf_edge_values() {
        assert_eq!(chi2_cdf(0.0, 3).unwrap(), 0.0);
        assert_relative_eq!(chi2_cdf(2.0 * 2f64.ln(), 2).unwrap(), 0.5, epsilon = 1e-14);
        assert!(matches!(chi2_cdf(-1.0, 2), Err(Error::Domain(_))));
        assert!(matches!(chi2_cdf(1.0, 0), Err(Error::Domain(_))));
        assert!(chi2_cdf(1e4, 3).unwrap() > 1.0 - 1e-15);
    }

    #[test]
    fn cdf_at_ninety_percent_point_of_four_dof() {
        // Independent route: numerical integration of the χ²₄ density x e^{-x/2} / 4.
        let oracle = integrate(|x| x * (-x / 2.0).exp() / 4.0, 0.0, 7.779, 1e-13).unwrap();
        let cdf = chi2_cdf(7.779, 4).unwrap();
        assert_relative_eq!(cdf, oracle, epsilon = 1e-12);
        assert!((cdf - 0.900).abs() < 1e-3);
    }

    #[test]
    fn quantile_examples() {
        assert_relative_eq!(chi2_quantile(0.5, 2).unwrap(), 2.0 * 2f64.ln(), epsilon = 1e-12);
        // Bisection oracle on the CDF.
        let (mut lo, mut hi) = (0.0, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if chi2_cdf(mid, 4).unwrap() < 0.9 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = chi2_quantile(0.9, 4).unwrap();
        assert_relative_eq!(q, 0.5 * (lo + hi), epsilon = 1e-10);
        assert!((q - 7.779).abs() < 1e-3);
        for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(chi2_quantile(bad, 3), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn quantile_round_trip_grid() {
        for dof in [1, 2, 3, 4, 6, 10, 30, 100] {
            for i in 1..100 {
                let q = i as f64 / 100.0;
                let x = chi2_quantile(q, dof).unwrap();
                assert!((chi2_cdf(x, dof).unwrap() - q).abs() < 1e-8, "dof={dof} q={q}");
            }
        }
    }

    #[test]
    fn cdf_is_monotone() {
        for dof in [1, 3, 10] {
            let mut prev = 0.0;
            for i in 0..400 {
                let v = chi2_cdf(i as f64 * 0.1, dof).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for dof in [1, 2, 5, 12] {
            let mass = chi2_expectation(|_| 1.0, dof, 1e-10).unwrap();
            assert_relative_eq!(mass, 1.0, epsilon = 1e-8);
            let mean = chi2_expectation(|x| x, dof, 1e-10).unwrap();
            assert_relative_eq!(mean, f64::from(dof), epsilon = 1e-7);
        }
    }
}
