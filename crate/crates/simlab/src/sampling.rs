//! Elliptical samplers, class sizes and seeded random substreams.

use jointshrink_core::pds::PdsMatrix;
use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};

use crate::error::{SimError, SimResult};

/// Named random streams derived from one experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Sizes = 1,
    Train = 2,
    Test = 3,
    Outliers = 4,
    Folds = 5,
    Split = 6,
}

/// Independent generator for `(stream, index)` under `seed`.
pub fn substream(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 48) | (index & ((1 << 48) - 1)));
    rng
}

/// `n` rows `x = μ + Σ^{1/2} z` with `z` standard normal.
pub fn sample_gaussian<R: Rng + ?Sized>(mu: &DVector<f64>, sigma: &PdsMatrix, n: usize, rng: &mut R) -> SimResult<DMatrix<f64>> {
    let p = check_dims(mu, sigma)?;
    let root = sigma.sqrt();
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut x = z * root.as_matrix();
    shift_rows(&mut x, mu);
    Ok(x)
}

/// `n` rows `x = μ + z/√(g/ν)` with `z ~ N(0, Σ)` and `g ~ χ²_ν`.
pub fn sample_t<R: Rng + ?Sized>(
    mu: &DVector<f64>,
    sigma: &PdsMatrix,
    nu: f64,
    n: usize,
    rng: &mut R,
) -> SimResult<DMatrix<f64>> {
    let p = check_dims(mu, sigma)?;
    let chi = ChiSquared::new(nu).map_err(|e| SimError::Spec(format!("invalid degrees of freedom {nu}: {e}")))?;
    let root = sigma.sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let g: f64 = chi.sample(rng);
        let scale = 1.0 / (g / nu).sqrt();
        let row = root.as_matrix() * z * scale;
        for j in 0..p {
            x[(i, j)] = row[j];
        }
    }
    shift_rows(&mut x, mu);
    Ok(x)
}

/// Class sizes `(n_1, …, n_K) ~ Multinomial(N, probs)`.
pub fn multinomial_sizes<R: Rng + ?Sized>(n_total: usize, probs: &[f64], rng: &mut R) -> SimResult<Vec<usize>> {
    let total: f64 = probs.iter().sum();
    if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(SimError::Spec("class probabilities must be non-negative and sum to 1".into()));
    }
    let dist = WeightedIndex::new(probs).map_err(|e| SimError::Spec(e.to_string()))?;
    let mut sizes = vec![0; probs.len()];
    for _ in 0..n_total {
        sizes[dist.sample(rng)] += 1;
    }
    Ok(sizes)
}

fn check_dims(mu: &DVector<f64>, sigma: &PdsMatrix) -> SimResult<usize> {
    if mu.len() != sigma.dim() {
        return Err(SimError::Spec(format!(
            "mean has length {} but scatter is {}×{}",
            mu.len(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    Ok(mu.len())
}

fn shift_rows(x: &mut DMatrix<f64>, mu: &DVector<f64>) {
    for mut row in x.row_iter_mut() {
        for j in 0..mu.len() {
            row[j] += mu[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| substream(7, Stream::Train, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| substream(7, Stream::Train, 3).random()).collect();
        assert_eq!(a, b);
        let c: u64 = substream(7, Stream::Test, 3).random();
        assert_ne!(a[0], c);
    }

    #[test]
    fn sizes_sum_to_total() {
        let mut rng = substream(1, Stream::Sizes, 0);
        for _ in 0..50 {
            let s = multinomial_sizes(100, &[0.25, 0.25, 0.5], &mut rng).unwrap();
            assert_eq!(s.iter().sum::<usize>(), 100);
        }
        assert_eq!(multinomial_sizes(100, &[1.0, 0.0, 0.0], &mut rng).unwrap(), vec![100, 0, 0]);
        assert!(multinomial_sizes(10, &[0.5, 0.6], &mut rng).is_err());
    }
}
