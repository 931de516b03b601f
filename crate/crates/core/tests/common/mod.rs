#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use quadscore::data::{ClusterConfiguration, ClusterTriplet, DataMatrix, Partition};
use quadscore::SeededRng;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal(rng: &mut SeededRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_data(n: usize, p: usize, rng: &mut SeededRng) -> DataMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| 3.0 * normal(rng)).collect())
        .collect();
    DataMatrix::from_rows(&rows).unwrap()
}

/// Random valid configuration with well-conditioned covariances.
pub fn random_theta(k: usize, p: usize, rng: &mut SeededRng) -> ClusterConfiguration {
    let raw: Vec<f64> = (0..k).map(|_| 0.1 + rng.uniform()).collect();
    let total: f64 = raw.iter().sum();
    let triplets = raw
        .iter()
        .map(|w| {
            let mu = DVector::from_fn(p, |_, _| 3.0 * normal(rng));
            let a = DMatrix::from_fn(p, p, |_, _| normal(rng));
            let sigma = &a * a.transpose() + DMatrix::identity(p, p) * 0.2;
            ClusterTriplet::new(w / total, mu, sigma)
        })
        .collect();
    ClusterConfiguration::new(triplets, "random")
}

pub fn random_partition(n: usize, k: usize, rng: &mut SeededRng) -> Partition {
    Partition::new((0..n).map(|_| rng.below(k)).collect(), k).unwrap()
}

/// Random sample size, dimension and cluster count within the given caps.
pub fn random_shape(
    rng: &mut SeededRng,
    max_n: usize,
    max_p: usize,
    max_k: usize,
) -> (usize, usize, usize) {
    let k = 1 + rng.below(max_k);
    let p = 1 + rng.below(max_p);
    let n = (k + 1).max(5) + rng.below(max_n - (k + 1).max(5) + 1);
    (n, p, k)
}
