//! Checks against independently computed reference values.

use approx::assert_relative_eq;
use jointshrink_core::distances::{distance, ellipticity_mean, kl_mean, DistanceKind, Weights};
use jointshrink_core::estimators::{
    check_tyler_condition, fit, pooled_m_estimator, tyler_covariance_rescale, Centering, ConditionMode,
    EstimatorConfig, GroupedSample, Proposal, TylerCondition,
};
use jointshrink_core::losses::{huber_b, tdist_b, LossSpec};
use jointshrink_core::modelselect::{cross_validate, make_folds, CvGrid, FoldSpec};
use jointshrink_core::pds::PdsMatrix;
use jointshrink_core::rda::{misclassification_risk, qda_score, RdaModel};
use jointshrink_core::special::{chi2_cdf, chi2_quantile};
use nalgebra::{dmatrix, dvector, DMatrix, DVector, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};
use statrs::distribution::{ChiSquared as StatrsChi2, ContinuousCDF};

#[test]
fn chi_square_against_statrs() {
    for dof in [1u32, 2, 4, 7, 12] {
        let reference = StatrsChi2::new(dof as f64).unwrap();
        for &x in &[0.05, 0.5, 1.0, 2.5, 7.779, 15.0, 40.0] {
            assert_relative_eq!(chi2_cdf(x, dof).unwrap(), reference.cdf(x), max_relative = 1e-9, epsilon = 1e-14);
        }
        for &q in &[0.01, 0.1, 0.5, 0.9, 0.99] {
            assert_relative_eq!(chi2_quantile(q, dof).unwrap(), reference.inverse_cdf(q), max_relative = 1e-8);
        }
    }
    assert_relative_eq!(chi2_cdf(2.0 * 2f64.ln(), 2).unwrap(), 0.5, epsilon = 1e-12);
    assert_relative_eq!(chi2_quantile(0.5, 2).unwrap(), 2.0 * 2f64.ln(), epsilon = 1e-10);
}

#[test]
fn huber_scale_matches_chi_square_formula() {
    let c_sq = StatrsChi2::new(4.0).unwrap().inverse_cdf(0.9);
    let expected = StatrsChi2::new(6.0).unwrap().cdf(c_sq) + c_sq * 0.1 / 4.0;
    assert_relative_eq!(huber_b(c_sq.sqrt(), 4).unwrap(), expected, max_relative = 1e-8);
}

#[test]
fn t_scale_matches_monte_carlo() {
    let (nu, p) = (2.0, 2usize);
    let b = tdist_b(nu, p).unwrap();
    let chi = ChiSquared::new(p as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 2_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let t: f64 = chi.sample(&mut rng);
        let v = (nu + p as f64) / p as f64 * t / (nu + t);
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - b).abs() < 3.0 * se, "b = {b}, MC = {mean} ± {se}");
}

fn diag(a: f64, b: f64) -> PdsMatrix {
    PdsMatrix::diagonal(&[a, b]).unwrap()
}

#[test]
fn distance_values() {
    let i2 = PdsMatrix::identity(2);
    assert_relative_eq!(
        distance(DistanceKind::KullbackLeibler, &i2, &diag(2.0, 2.0)).unwrap(),
        4.0 - 4f64.ln() - 2.0,
        epsilon = 1e-12
    );
    assert_relative_eq!(
        distance(DistanceKind::Ellipticity, &i2, &diag(4.0, 1.0)).unwrap(),
        2.0 * 2.5f64.ln() - 4f64.ln(),
        epsilon = 1e-12
    );
    assert_relative_eq!(
        distance(DistanceKind::Riemannian, &i2, &diag(1f64.exp().powi(2), 1.0)).unwrap(),
        4.0,
        epsilon = 1e-12
    );
}

#[test]
fn ellipticity_mean_of_diagonals_matches_scalar_iteration() {
    // Diagonal inputs keep the mean diagonal, so the fixed point
    // Σ⁻¹ = Σ π_k p Σ_k⁻¹ / Tr(Σ_k⁻¹ Σ) reduces to scalar arithmetic.
    let inputs = [[1.0, 1.0], [9.0, 1.0]];
    let mut s = [1.0f64, 1.0];
    for _ in 0..10_000 {
        let mut inv = [0.0; 2];
        for a in &inputs {
            let tr = s[0] / a[0] + s[1] / a[1];
            for j in 0..2 {
                inv[j] += 0.5 * 2.0 / (a[j] * tr);
            }
        }
        let mut next = [1.0 / inv[0], 1.0 / inv[1]];
        let scale = 2.0 / (next[0] + next[1]);
        next.iter_mut().for_each(|v| *v *= scale);
        let change = (next[0] - s[0]).abs() + (next[1] - s[1]).abs();
        s = next;
        if change < 1e-15 {
            break;
        }
    }
    let w = Weights::new(vec![0.5, 0.5]).unwrap();
    let m = ellipticity_mean(&w, &[diag(1.0, 1.0), diag(9.0, 1.0)], 1e-13).unwrap();
    assert_relative_eq!(m.as_matrix()[(0, 0)], s[0], epsilon = 1e-10);
    assert_relative_eq!(m.as_matrix()[(1, 1)], s[1], epsilon = 1e-10);
    assert!(m.as_matrix()[(0, 1)].abs() < 1e-12);
}

fn fixture() -> GroupedSample {
    GroupedSample::new(vec![
        dmatrix![1.0, 0.4; -0.8, 1.3; 0.5, -1.1; -1.4, -0.2; 0.9, 0.8; 0.1, -0.6],
        dmatrix![2.5, 0.3; -1.9, 0.7; 0.4, 0.2; -0.6, -0.9; 1.2, -0.4],
    ])
    .unwrap()
}

fn sym2(v: &[f64; 3]) -> Matrix2<f64> {
    Matrix2::new(v[0], v[1], v[1], v[2])
}

/// Residual of `Σ⁻¹ = Σ_k π_k (β S_k + (1−β) Σ)⁻¹` in the upper triangle.
fn stationarity(sigma: &[f64; 3], s: &[Matrix2<f64>], pi: &[f64], beta: f64) -> [f64; 3] {
    let m = sym2(sigma);
    let mut rhs = Matrix2::zeros();
    for (sk, w) in s.iter().zip(pi) {
        rhs += (sk * beta + m * (1.0 - beta)).try_inverse().unwrap() * *w;
    }
    let r = m.try_inverse().unwrap() - rhs;
    [r[(0, 0)], r[(0, 1)], r[(1, 1)]]
}

#[test]
fn prop2_gaussian_kl_matches_newton_oracle() {
    let data = fixture();
    let beta = 0.35;
    let s: Vec<Matrix2<f64>> = data
        .groups()
        .iter()
        .map(|g| {
            let g2 = g.fixed_columns::<2>(0);
            g2.transpose() * g2 / g.nrows() as f64
        })
        .collect();
    let pi: Vec<f64> = data.weights().values().to_vec();

    let mut x = [1.0, 0.0, 1.0];
    for _ in 0..100 {
        let f = stationarity(&x, &s, &pi, beta);
        let mut jac = nalgebra::Matrix3::zeros();
        for j in 0..3 {
            let h = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x;
            xp[j] += h;
            let fp = stationarity(&xp, &s, &pi, beta);
            for i in 0..3 {
                jac[(i, j)] = (fp[i] - f[i]) / h;
            }
        }
        let step = jac.lu().solve(&nalgebra::Vector3::new(f[0], f[1], f[2])).unwrap();
        let mut damp = 1.0;
        loop {
            let cand = [x[0] - damp * step[0], x[1] - damp * step[1], x[2] - damp * step[2]];
            let ok = sym2(&cand).cholesky().is_some();
            let norm = |v: [f64; 3]| v.iter().map(|a| a * a).sum::<f64>();
            if ok && norm(stationarity(&cand, &s, &pi, beta)) <= norm(f) {
                x = cand;
                break;
            }
            damp *= 0.5;
            if damp < 1e-12 {
                break;
            }
        }
    }
    let cfg = EstimatorConfig::new(Proposal::Prop2, LossSpec::gaussian(2), beta).with_tol(1e-13);
    let fitted = fit(&data, &cfg).unwrap();
    let c = fitted.center.as_matrix();
    assert_relative_eq!(c[(0, 0)], x[0], epsilon = 1e-8);
    assert_relative_eq!(c[(0, 1)], x[1], epsilon = 1e-8);
    assert_relative_eq!(c[(1, 1)], x[2], epsilon = 1e-8);
    for (k, sk) in s.iter().enumerate() {
        let expected = sk * beta + sym2(&x) * (1.0 - beta);
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            assert_relative_eq!(fitted.sigmas[k].as_matrix()[(i, j)], expected[(i, j)], epsilon = 1e-8);
        }
    }
}

#[test]
fn kl_mean_is_weighted_harmonic_mean() {
    let w = Weights::new(vec![0.5, 0.5]).unwrap();
    let m = kl_mean(&w, &[PdsMatrix::identity(1), PdsMatrix::scaled_identity(1, 3.0)]).unwrap();
    assert_relative_eq!(m.as_matrix()[(0, 0)], 1.5, epsilon = 1e-14);
}

#[test]
fn tyler_on_axis_copies_is_spherical() {
    let mut rows = Vec::new();
    for _ in 0..5 {
        rows.push(vec![1.0, 0.0]);
        rows.push(vec![0.0, -2.0]);
    }
    let data = GroupedSample::from_points(&[rows]).unwrap();
    let s = pooled_m_estimator(&data, &LossSpec::tyler(2), 1e-12, 2000).unwrap();
    let m = s.as_matrix();
    assert_relative_eq!(m[(0, 0)], m[(1, 1)], max_relative = 1e-9);
    assert!(m[(0, 1)].abs() < 1e-9);
}

#[test]
fn tyler_condition_examples() {
    let collinear = dmatrix![1.0, 2.0; -0.5, -1.0; 3.0, 6.0; 2.0, 4.0];
    let v = check_tyler_condition(&collinear, 1.0, ConditionMode::Exhaustive).unwrap();
    assert!(matches!(v, TylerCondition::Violated(ref w) if w.dim == 1 && w.count == 4));

    let three = dmatrix![1.0, 0.2, 0.3, 0.1; -0.4, 1.0, 0.5, 0.2; 0.3, -0.7, 1.0, 0.8];
    assert!(matches!(
        check_tyler_condition(&three, 1.0, ConditionMode::GeneralPosition).unwrap(),
        TylerCondition::Violated(_)
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = rand_distr::StandardNormal;
    let twenty = DMatrix::from_fn(20, 4, |_, _| normal.sample(&mut rng));
    assert!(check_tyler_condition(&twenty, 0.5, ConditionMode::GeneralPosition).unwrap().holds());
}

#[test]
fn tyler_rescale_uses_chi_square_median() {
    let x = dmatrix![2.772f64.sqrt(), 0.0; 0.0, 3.0; 0.5, 0.0];
    let s = tyler_covariance_rescale(&PdsMatrix::identity(2), &x).unwrap();
    assert_relative_eq!(s.as_matrix()[(0, 0)], 2.772 / (2.0 * 2f64.ln()), max_relative = 1e-12);
}

#[test]
fn qda_scores_and_rule() {
    let sigma = diag(4.0, 1.0);
    let score = qda_score(dvector![1.0, 0.0].as_view(), &DVector::zeros(2), &sigma).unwrap();
    assert_relative_eq!(score, 0.25 + 4f64.ln(), epsilon = 1e-14);

    let model = RdaModel::new(
        vec![DVector::zeros(2), DVector::zeros(2)],
        vec![PdsMatrix::identity(2), PdsMatrix::scaled_identity(2, 4.0)],
        1.0,
        Proposal::Prop1,
        LossSpec::gaussian(2),
        DistanceKind::KullbackLeibler,
    )
    .unwrap();
    let s = model.scores(dvector![0.0, 0.0].as_view()).unwrap();
    assert_relative_eq!(s[1] - s[0], 16f64.ln(), epsilon = 1e-14);
    assert_eq!(model.classify(dvector![0.0, 0.0].as_view()).unwrap(), 0);

    // Class 0 wins while ‖x‖² < (8/3) ln 4 ≈ 3.697.
    let test = GroupedSample::new(vec![dmatrix![1.0, 1.0; 1.9, 0.0; 2.0, 0.0], dmatrix![0.5, 0.0; 3.0, 0.0]]).unwrap();
    assert_relative_eq!(misclassification_risk(&model, &test).unwrap(), 2.0 / 5.0, epsilon = 1e-15);
}

#[test]
fn cross_validation_matches_brute_force() {
    let data = GroupedSample::new(vec![dmatrix![
        0.3, 1.2; -1.1, 0.4; 2.0, -0.7; 0.8, 0.9; -0.5, -1.6; 1.4, 0.1
    ]])
    .unwrap();
    let grid = CvGrid::new(vec![0.3, 0.8], FoldSpec::KFold(3), 17).unwrap();
    let cfg = EstimatorConfig::new(Proposal::Prop1, LossSpec::gaussian(2), 0.5).with_tol(1e-13);
    let report = cross_validate(&data, &cfg, &grid, Centering::SampleMean).unwrap();
    let folds = make_folds(&data, FoldSpec::KFold(3), 17).unwrap();

    let x = data.group(0);
    // With one group the pooled target equals the group SCM, so every β gives
    // the training SCM about the training mean.
    let mut expected = 0.0;
    for fold in &folds {
        let held = &fold[0];
        let train: Vec<usize> = (0..6).filter(|i| !held.contains(i)).collect();
        let n = train.len() as f64;
        let mut mu = [0.0; 2];
        for &i in &train {
            mu[0] += x[(i, 0)] / n;
            mu[1] += x[(i, 1)] / n;
        }
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for &i in &train {
            let (u, v) = (x[(i, 0)] - mu[0], x[(i, 1)] - mu[1]);
            a += u * u / n;
            b += u * v / n;
            c += v * v / n;
        }
        let det = a * c - b * b;
        let mut fit = held.len() as f64 * det.ln();
        for &i in held {
            let (u, v) = (x[(i, 0)] - mu[0], x[(i, 1)] - mu[1]);
            fit += (c * u * u - 2.0 * b * u * v + a * v * v) / det;
        }
        expected += fit / folds.len() as f64;
    }
    for value in &report.cv_curve {
        assert_relative_eq!(value.unwrap(), expected, epsilon = 1e-10);
    }
}
