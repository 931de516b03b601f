//! Lloyd's k-means with k-means++ seeding.

use ndarray::{Array2, ArrayView1};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centers: Array2<f64>,
    pub labels: Vec<usize>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// SSE after each assignment step.
    pub sse_trace: Vec<f64>,
}

#[inline]
pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance to the nearest chosen center.
pub fn kmeans_plus_plus(data: &DataMatrix, k: usize, rng: &mut SeededRng) -> Array2<f64> {
    let x = data.values();
    let n = data.n();
    let mut centers = Array2::zeros((k, data.p()));
    let first = rng.below(n);
    centers.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(n)
        };
        centers.row_mut(c).assign(&x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(pick)));
        }
    }
    centers
}

/// Nearest center for each point (lowest index on ties) and the total SSE.
fn assign(data: &DataMatrix, centers: &Array2<f64>, labels: &mut [usize], dist: &mut [f64]) -> f64 {
    let x = data.values();
    let mut sse = 0.0;
    for i in 0..data.n() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.rows().into_iter().enumerate() {
            let d = sq_dist(x.row(i), center);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        dist[i] = best_d;
        sse += best_d;
    }
    sse
}

/// Runs Lloyd iterations from the given centers. An empty cluster is
/// repaired once by moving the point farthest from its center into it; a
/// second empty cluster fails the run.
pub fn lloyd(data: &DataMatrix, mut centers: Array2<f64>, max_iter: usize) -> Result<KMeansFit> {
    let n = data.n();
    let k = centers.nrows();
    let x = data.values();
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut new_labels = vec![0; n];
    let mut repaired = false;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut sse = f64::INFINITY;

    while iterations < max_iter.max(1) {
        iterations += 1;
        sse = assign(data, &centers, &mut new_labels, &mut dist);
        let mut counts = vec![0usize; k];
        new_labels.iter().for_each(|&l| counts[l] += 1);
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            if repaired {
                return Err(Error::DegenerateFit(format!(
                    "k-means cluster {empty} emptied twice"
                )));
            }
            repaired = true;
            let far = (0..n)
                .filter(|&i| counts[new_labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .ok_or(Error::EmptyCluster(empty))?;
            counts[new_labels[far]] -= 1;
            counts[empty] += 1;
            sse -= dist[far];
            dist[far] = 0.0;
            new_labels[far] = empty;
            centers.row_mut(empty).assign(&x.row(far));
        }
        trace.push(sse);
        if new_labels == labels {
            converged = true;
            break;
        }
        labels.copy_from_slice(&new_labels);
        centers.fill(0.0);
        for (i, &l) in labels.iter().enumerate() {
            let mut row = centers.row_mut(l);
            row += &x.row(i);
        }
        for (c, &cnt) in counts.iter().enumerate() {
            centers.row_mut(c).mapv_inplace(|v| v / cnt as f64);
        }
    }
    if !converged {
        labels.copy_from_slice(&new_labels);
    }
    Ok(KMeansFit {
        centers,
        labels,
        sse,
        iterations,
        converged,
        sse_trace: trace,
    })
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans(
    data: &DataMatrix,
    k: usize,
    max_iter: usize,
    rng: &mut SeededRng,
) -> Result<KMeansFit> {
    if k > data.n() {
        return Err(Error::NotEnoughPoints { k, n: data.n() });
    }
    let centers = kmeans_plus_plus(data, k, rng);
    lloyd(data, centers, max_iter)
}
