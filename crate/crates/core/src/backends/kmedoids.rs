//! Partitioning Around Medoids (BUILD + SWAP) with Euclidean dissimilarity.

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::kmeans::sq_dist;

#[derive(Debug, Clone)]
pub struct PamFit {
    pub medoids: Vec<usize>,
    pub labels: Vec<usize>,
    /// Total dissimilarity of points to their medoids.
    pub cost: f64,
    pub swaps: usize,
    pub converged: bool,
}

/// Dense row-major Euclidean dissimilarity matrix.
pub fn euclidean_dissimilarity(data: &DataMatrix) -> Vec<f64> {
    let n = data.n();
    let x = data.values();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sq_dist(x.row(i), x.row(j)).sqrt();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Greedy BUILD: each step adds the point that most reduces total cost.
pub fn build(diss: &[f64], n: usize, k: usize) -> Vec<usize> {
    let mut medoids = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    let mut is_medoid = vec![false; n];
    for _ in 0..k {
        let mut best = usize::MAX;
        let mut best_cost = f64::INFINITY;
        for c in (0..n).filter(|&c| !is_medoid[c]) {
            let cost: f64 = (0..n).map(|j| nearest[j].min(diss[c * n + j])).sum();
            if cost < best_cost {
                best_cost = cost;
                best = c;
            }
        }
        is_medoid[best] = true;
        medoids.push(best);
        for j in 0..n {
            nearest[j] = nearest[j].min(diss[best * n + j]);
        }
    }
    medoids
}

/// Nearest and second-nearest medoid positions and distances for each point.
/// A medoid is always assigned to itself.
fn nearest_two(diss: &[f64], n: usize, medoids: &[usize]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let mut near = vec![0; n];
    let mut d1 = vec![f64::INFINITY; n];
    let mut d2 = vec![f64::INFINITY; n];
    for j in 0..n {
        for (m, &c) in medoids.iter().enumerate() {
            let d = if c == j { -1.0 } else { diss[c * n + j] };
            if d < d1[j] {
                d2[j] = d1[j];
                d1[j] = d;
                near[j] = m;
            } else if d < d2[j] {
                d2[j] = d;
            }
        }
        d1[j] = d1[j].max(0.0);
        d2[j] = d2[j].max(0.0);
    }
    (near, d1, d2)
}

/// SWAP phase: applies the best improving (medoid, non-medoid) exchange
/// until none improves the cost.
pub fn swap(diss: &[f64], n: usize, mut medoids: Vec<usize>, max_iter: usize) -> PamFit {
    let mut swaps = 0;
    let mut converged = false;
    loop {
        let (near, d1, d2) = nearest_two(diss, n, &medoids);
        if swaps >= max_iter {
            let cost = d1.iter().sum();
            return PamFit {
                medoids,
                labels: near,
                cost,
                swaps,
                converged,
            };
        }
        let mut is_medoid = vec![false; n];
        medoids.iter().for_each(|&m| is_medoid[m] = true);
        let mut best = (0.0, usize::MAX, usize::MAX);
        for (mi, _) in medoids.iter().enumerate() {
            for h in (0..n).filter(|&h| !is_medoid[h]) {
                let mut delta = 0.0;
                for j in 0..n {
                    let dhj = if j == h { 0.0 } else { diss[h * n + j] };
                    if near[j] == mi {
                        delta += dhj.min(d2[j]) - d1[j];
                    } else if dhj < d1[j] {
                        delta += dhj - d1[j];
                    }
                }
                if delta < best.0 - 1e-12 {
                    best = (delta, mi, h);
                }
            }
        }
        if best.1 == usize::MAX {
            converged = true;
            let cost = d1.iter().sum();
            return PamFit {
                medoids,
                labels: near,
                cost,
                swaps,
                converged,
            };
        }
        medoids[best.1] = best.2;
        swaps += 1;
    }
}

/// Full PAM. Starting medoids come from BUILD, or are drawn at random when
/// `random_start` is set.
pub fn pam(
    data: &DataMatrix,
    k: usize,
    max_iter: usize,
    random_start: Option<&mut SeededRng>,
) -> Result<PamFit> {
    let n = data.n();
    if k > n {
        return Err(Error::NotEnoughPoints { k, n });
    }
    let diss = euclidean_dissimilarity(data);
    let start = match random_start {
        Some(rng) => {
            let mut idx: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut idx);
            idx.truncate(k);
            idx
        }
        None => build(&diss, n, k),
    };
    Ok(swap(&diss, n, start, max_iter))
}
