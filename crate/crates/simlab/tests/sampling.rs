use jointshrink_core::pds::PdsMatrix;
use jointshrink_simlab::sampling::{multinomial_sizes, sample_gaussian, sample_t, substream, Stream};
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

fn scatter() -> PdsMatrix {
    PdsMatrix::new(DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, -0.3, 0.0, -0.3, 0.5])).unwrap()
}

#[test]
fn gaussian_moments_within_three_standard_errors() {
    let sigma = scatter();
    let mu = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let n = 400_000;
    let x = sample_gaussian(&mu, &sigma, n, &mut substream(11, Stream::Train, 0)).unwrap();
    let mean = x.row_mean().transpose();
    let s = sigma.as_matrix();
    for j in 0..3 {
        assert!((mean[j] - mu[j]).abs() < 3.0 * (s[(j, j)] / n as f64).sqrt());
    }
    let centered = DMatrix::from_fn(n, 3, |i, j| x[(i, j)] - mu[j]);
    let cov = centered.transpose() * &centered / n as f64;
    for i in 0..3 {
        for j in 0..3 {
            let se = ((s[(i, i)] * s[(j, j)] + s[(i, j)].powi(2)) / n as f64).sqrt();
            assert!((cov[(i, j)] - s[(i, j)]).abs() < 3.0 * se, "entry ({i},{j}): {} vs {}", cov[(i, j)], s[(i, j)]);
        }
    }
}

#[test]
fn t_radial_law_passes_kolmogorov_smirnov() {
    let sigma = scatter();
    let mu = DVector::zeros(3);
    let (n, nu) = (5_000, 2.0);
    let x = sample_t(&mu, &sigma, nu, n, &mut substream(12, Stream::Train, 0)).unwrap();
    let inv = sigma.inverse_matrix();
    // Squared Mahalanobis distance over p follows F(p, ν).
    let mut f: Vec<f64> = (0..n)
        .map(|i| {
            let r = x.row(i);
            (r * inv * r.transpose())[(0, 0)] / 3.0
        })
        .collect();
    f.sort_by(f64::total_cmp);
    let law = FisherSnedecor::new(3.0, nu).unwrap();
    let d = f
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = law.cdf(v);
            (c - i as f64 / n as f64).abs().max((c - (i + 1) as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 1.36 / (n as f64).sqrt(), "KS statistic {d}");
}

#[test]
fn multinomial_sizes_have_expected_mean() {
    let probs = [0.25, 0.25, 0.5];
    let draws = 4_000;
    let mut rng = substream(13, Stream::Sizes, 0);
    let mut totals = [0.0; 3];
    for _ in 0..draws {
        let s = multinomial_sizes(100, &probs, &mut rng).unwrap();
        assert_eq!(s.iter().sum::<usize>(), 100);
        for (t, n) in totals.iter_mut().zip(&s) {
            *t += *n as f64;
        }
    }
    for (t, p) in totals.iter().zip(probs) {
        let se = (100.0 * p * (1.0 - p) / draws as f64).sqrt();
        assert!((t / draws as f64 - 100.0 * p).abs() < 3.0 * se);
    }
}

#[test]
fn substreams_are_reproducible_and_distinct() {
    let sigma = scatter();
    let mu = DVector::zeros(3);
    let a = sample_gaussian(&mu, &sigma, 5, &mut substream(1, Stream::Train, 7)).unwrap();
    let b = sample_gaussian(&mu, &sigma, 5, &mut substream(1, Stream::Train, 7)).unwrap();
    let c = sample_gaussian(&mu, &sigma, 5, &mut substream(1, Stream::Test, 7)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
