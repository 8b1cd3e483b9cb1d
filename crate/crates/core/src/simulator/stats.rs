//! Batch-means standard errors and block bootstrap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }

    /// `|self − other| ≤ k · sqrt(se₁² + se₂²)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.se.hypot(other.se)
    }

    /// `|self − target| ≤ k · se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Standard error of the mean of (approximately independent) batch means.
pub fn batch_se(batch_values: &[f64]) -> f64 {
    let n = batch_values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(batch_values);
    let ss: Vec<f64> = batch_values.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&ss) / (n - 1) as f64 / n as f64).sqrt()
}

/// Summation with `O(log n)` error growth and an order fixed by the input.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Bootstrap standard deviation of `stat` over `resamples` draws of block
/// indices with replacement. `stat` receives multiplicities per block.
pub fn bootstrap_se<F>(n_blocks: usize, resamples: usize, seed: u64, mut stat: F) -> Vec<f64>
where
    F: FnMut(&[u32]) -> Vec<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0u32; n_blocks];
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        weights.iter_mut().for_each(|w| *w = 0);
        for _ in 0..n_blocks {
            weights[rng.random_range(0..n_blocks)] += 1;
        }
        draws.push(stat(&weights));
    }
    let width = draws.first().map_or(0, Vec::len);
    (0..width)
        .map(|k| {
            let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
            let m = mean(&col);
            let ss: Vec<f64> = col.iter().map(|x| (x - m) * (x - m)).collect();
            (pairwise_sum(&ss) / (col.len() - 1).max(1) as f64).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_se_of_constant_is_zero() {
        assert_eq!(batch_se(&[2.0; 10]), 0.0);
    }

    #[test]
    fn batch_se_matches_textbook() {
        // sd of 1..=5 is sqrt(2.5); se = sqrt(2.5/5)
        let se = batch_se(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((se - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let xs = vec![0.1; 100_000];
        assert!((pairwise_sum(&xs) - 10_000.0).abs() < 1e-9);
    }

    #[test]
    fn bootstrap_mean_se_is_close_to_analytic() {
        let xs: Vec<f64> = (0..400).map(|i| ((i * 7919) % 400) as f64 / 400.0).collect();
        let se = bootstrap_se(xs.len(), 400, 7, |w| {
            let s: f64 = xs.iter().zip(w).map(|(x, &k)| x * k as f64).sum();
            vec![s / xs.len() as f64]
        })[0];
        let analytic = batch_se(&xs);
        assert!((se / analytic - 1.0).abs() < 0.15, "{se} vs {analytic}");
    }

    #[test]
    fn agreement_bands() {
        let a = Estimate::new(1.0, 0.3);
        let b = Estimate::new(1.9, 0.4);
        assert!(a.agrees_with(&b, 2.0));
        assert!(!a.agrees_with(&b, 1.0));
        assert!(a.within(1.5, 2.0) && !a.within(1.7, 2.0));
    }
}
