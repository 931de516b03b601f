//! Quadratic scores of points under cluster triplets, the induced partition,
//! and the hard and smooth score criteria built on top of them.
//!
//! For a triplet `(pi, mu, sigma)` the quadratic score of `x` is
//!
//! ```text
//! qs(x) = log pi - 1/2 log det sigma - 1/2 (x - mu)' sigma^-1 (x - mu)
//! ```
//!
//! which equals `log(pi * phi(x; mu, sigma)) + (p/2) log(2 pi)`. All density
//! work is done in log space with Cholesky factors; no covariance is ever
//! inverted explicitly.

use nalgebra::Cholesky;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{ClusterConfiguration, ClusterTriplet, DataMatrix, Partition};
use crate::error::{Error, Result};

/// Hard (0-1 indicator) or smooth (softmax) cluster weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreMode {
    Hard,
    Smooth,
}

/// Difference `qs - log(pi * phi)`, constant over points and clusters.
pub fn score_constant(p: usize) -> f64 {
    0.5 * p as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Per-cluster precomputation: `log pi`, `1/2 log det sigma` and the lower
/// Cholesky factor stored row-major.
#[derive(Debug, Clone)]
struct Component {
    log_pi: f64,
    half_log_det: f64,
    mu: Vec<f64>,
    chol: Vec<f64>,
}

impl Component {
    fn new(t: &ClusterTriplet, index: usize) -> Result<Self> {
        let p = t.dim();
        let chol = Cholesky::new(t.sigma.clone()).ok_or(Error::SingularSigma { cluster: index })?;
        let l = chol.l();
        let diag: Vec<f64> = (0..p).map(|i| l[(i, i)]).collect();
        let max_d = diag.iter().fold(0.0_f64, |a, &b| a.max(b));
        let min_d = diag.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if min_d.is_nan() || min_d <= 0.0 || min_d * min_d <= 1e-300 * max_d * max_d {
            return Err(Error::SingularSigma { cluster: index });
        }
        let mut flat = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..=i {
                flat[i * p + j] = l[(i, j)];
            }
        }
        Ok(Self {
            log_pi: t.pi.ln(),
            half_log_det: diag.iter().map(|d| d.ln()).sum(),
            mu: t.mu.iter().copied().collect(),
            chol: flat,
        })
    }

    /// Squared Mahalanobis distance via forward substitution.
    #[inline]
    fn mahalanobis(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let p = self.mu.len();
        let mut acc = 0.0;
        for i in 0..p {
            let row = &self.chol[i * p..i * p + i];
            let mut s = x[i] - self.mu[i];
            for (l, z) in row.iter().zip(scratch.iter()) {
                s -= l * z;
            }
            let z = s / self.chol[i * p + i];
            scratch[i] = z;
            acc += z * z;
        }
        acc
    }

    #[inline]
    fn score(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        self.log_pi - self.half_log_det - 0.5 * self.mahalanobis(x, scratch)
    }
}

/// Factorized form of a configuration, reusable across many points.
#[derive(Debug, Clone)]
pub struct ScoringModel {
    comps: Vec<Component>,
    p: usize,
}

impl ScoringModel {
    pub fn new(theta: &ClusterConfiguration) -> Result<Self> {
        let comps = theta
            .triplets
            .iter()
            .enumerate()
            .map(|(k, t)| Component::new(t, k))
            .collect::<Result<Vec<_>>>()?;
        if comps.is_empty() {
            return Err(Error::InvalidConfiguration("no clusters".into()));
        }
        Ok(Self {
            comps,
            p: theta.dim(),
        })
    }

    pub fn k(&self) -> usize {
        self.comps.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Writes the `K` quadratic scores of `x` into `out`.
    #[inline]
    pub fn scores_into(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c.score(x, scratch);
        }
    }

    /// Cluster-weighted point score for one point.
    #[inline]
    pub fn point_score(
        &self,
        x: &[f64],
        mode: ScoreMode,
        buf: &mut [f64],
        scratch: &mut [f64],
    ) -> f64 {
        self.scores_into(x, buf, scratch);
        match mode {
            ScoreMode::Hard => buf.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ScoreMode::Smooth => softmax_weighted_mean(buf),
        }
    }

    /// Mean point score over all rows of `data`.
    pub fn mean_score(&self, data: &DataMatrix, mode: ScoreMode) -> f64 {
        let mut buf = vec![0.0; self.k()];
        let mut scratch = vec![0.0; self.p];
        let mut total = 0.0;
        for_each_row(data, |_, x| {
            total += self.point_score(x, mode, &mut buf, &mut scratch);
        });
        total / data.n() as f64
    }

    /// `n x K` matrix of quadratic scores.
    pub fn score_matrix(&self, data: &DataMatrix) -> Array2<f64> {
        let mut out = Array2::zeros((data.n(), self.k()));
        let mut scratch = vec![0.0; self.p];
        let mut buf = vec![0.0; self.k()];
        for_each_row(data, |i, x| {
            self.scores_into(x, &mut buf, &mut scratch);
            out.row_mut(i)
                .iter_mut()
                .zip(&buf)
                .for_each(|(o, v)| *o = *v);
        });
        out
    }
}

/// Calls `f(i, row_i)` with each row as a contiguous slice.
pub(crate) fn for_each_row(data: &DataMatrix, mut f: impl FnMut(usize, &[f64])) {
    let mut tmp = vec![0.0; data.p()];
    for (i, row) in data.values().rows().into_iter().enumerate() {
        match row.as_slice() {
            Some(s) => f(i, s),
            None => {
                tmp.iter_mut().zip(row.iter()).for_each(|(t, v)| *t = *v);
                f(i, &tmp);
            }
        }
    }
}

/// `sum_k softmax(q)_k q_k` with max-subtraction.
#[inline]
pub fn softmax_weighted_mean(q: &[f64]) -> f64 {
    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for &v in q {
        let w = (v - m).exp();
        num += w * v;
        den += w;
    }
    num / den
}

/// Index of the maximum, lowest index on ties.
#[inline]
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Quadratic score of a single point under a single triplet.
pub fn quadratic_score(x: &[f64], triplet: &ClusterTriplet) -> Result<f64> {
    if x.len() != triplet.dim() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: triplet.dim(),
        });
    }
    let c = Component::new(triplet, 0)?;
    let mut scratch = vec![0.0; x.len()];
    Ok(c.score(x, &mut scratch))
}

/// Per-point evaluation of a Gaussian mixture.
#[derive(Debug, Clone)]
pub struct GaussianEvaluation {
    /// `log(pi_k phi(x_i; mu_k, sigma_k))`
    pub log_component: Array2<f64>,
    /// quadratic scores
    pub qs: Array2<f64>,
    /// `log psi(x_i; theta)`
    pub log_mixture: Array1<f64>,
}

/// Evaluates component log-densities, quadratic scores and mixture
/// log-densities for every point.
pub fn evaluate(data: &DataMatrix, theta: &ClusterConfiguration) -> Result<GaussianEvaluation> {
    let model = ScoringModel::new(theta)?;
    let qs = model.score_matrix(data);
    let c = score_constant(data.p());
    let log_component = qs.mapv(|v| v - c);
    let log_mixture = log_component
        .rows()
        .into_iter()
        .map(|r| log_sum_exp(r.as_slice().expect("standard layout")))
        .collect();
    Ok(GaussianEvaluation {
        log_component,
        qs,
        log_mixture,
    })
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Assigns every point to the cluster with the largest quadratic score.
pub fn quadratic_partition(data: &DataMatrix, theta: &ClusterConfiguration) -> Result<Partition> {
    let model = ScoringModel::new(theta)?;
    let mut buf = vec![0.0; model.k()];
    let mut scratch = vec![0.0; model.p()];
    let mut labels = Vec::with_capacity(data.n());
    for_each_row(data, |_, x| {
        model.scores_into(x, &mut buf, &mut scratch);
        labels.push(argmax(&buf));
    });
    Partition::new(labels, model.k())
}

/// Hard score `H_n`: mean of the row-wise maximum quadratic score.
pub fn hard_score(data: &DataMatrix, theta: &ClusterConfiguration) -> Result<f64> {
    Ok(ScoringModel::new(theta)?.mean_score(data, ScoreMode::Hard))
}

/// Smooth score `T_n`: mean of softmax-weighted quadratic scores.
pub fn smooth_score(data: &DataMatrix, theta: &ClusterConfiguration) -> Result<f64> {
    Ok(ScoringModel::new(theta)?.mean_score(data, ScoreMode::Smooth))
}

/// Either score, by mode.
pub fn score(data: &DataMatrix, theta: &ClusterConfiguration, mode: ScoreMode) -> Result<f64> {
    Ok(ScoringModel::new(theta)?.mean_score(data, mode))
}

/// Row-stochastic `n x K` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreWeights {
    pub weights: Array2<f64>,
    pub mode: ScoreMode,
}

impl ScoreWeights {
    /// One-hot weights of a partition.
    pub fn from_partition(z: &Partition) -> Self {
        let mut weights = Array2::zeros((z.n(), z.k()));
        for (i, &l) in z.labels().iter().enumerate() {
            weights[[i, l]] = 1.0;
        }
        Self {
            weights,
            mode: ScoreMode::Hard,
        }
    }
}

/// Softmax of the quadratic scores over clusters, per point.
pub fn smooth_weights(data: &DataMatrix, theta: &ClusterConfiguration) -> Result<ScoreWeights> {
    let mut weights = ScoringModel::new(theta)?.score_matrix(data);
    for mut row in weights.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    Ok(ScoreWeights {
        weights,
        mode: ScoreMode::Smooth,
    })
}

/// Gaussian posterior membership probabilities `pi_k phi_k / psi`.
pub fn posterior_weights(data: &DataMatrix, theta: &ClusterConfiguration) -> Result<ScoreWeights> {
    let eval = evaluate(data, theta)?;
    let mut weights = eval.log_component;
    for (mut row, lm) in weights.rows_mut().into_iter().zip(eval.log_mixture.iter()) {
        row.mapv_inplace(|v| (v - lm).exp());
    }
    Ok(ScoreWeights {
        weights,
        mode: ScoreMode::Smooth,
    })
}

/// Row-wise argmax with lowest-index tie-break.
pub fn map_assign(weights: &ScoreWeights) -> Partition {
    let k = weights.weights.ncols();
    let labels = weights
        .weights
        .rows()
        .into_iter()
        .map(|r| argmax(&r.to_vec()))
        .collect();
    Partition::new(labels, k).expect("argmax is in range")
}

/// Mean per-point entropy `-sum_k w log w`, with `0 log 0 = 0`.
pub fn assignment_entropy(weights: &ScoreWeights) -> f64 {
    let n = weights.weights.nrows();
    let total: f64 = weights
        .weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.ln())
        .sum();
    total / n as f64
}

/// `sum_i log(pi_{z_i} phi(x_i; mu_{z_i}, sigma_{z_i}))`.
pub fn complete_data_loglik(
    data: &DataMatrix,
    theta: &ClusterConfiguration,
    z: &Partition,
) -> Result<f64> {
    if z.k() != theta.k() {
        return Err(Error::InvalidArgument(format!(
            "partition has k = {}, configuration has k = {}",
            z.k(),
            theta.k()
        )));
    }
    if z.n() != data.n() {
        return Err(Error::LengthMismatch {
            left: z.n(),
            right: data.n(),
        });
    }
    let model = ScoringModel::new(theta)?;
    let c = score_constant(data.p());
    let mut scratch = vec![0.0; data.p()];
    let mut total = 0.0;
    for_each_row(data, |i, x| {
        total += model.comps[z.labels()[i]].score(x, &mut scratch) - c;
    });
    Ok(total)
}

/// `E[clik | X] = sum_i sum_k omega_ik log(pi_k phi_ik)`.
pub fn expected_complete_loglik(data: &DataMatrix, theta: &ClusterConfiguration) -> Result<f64> {
    let eval = evaluate(data, theta)?;
    let mut total = 0.0;
    for (row, lm) in eval
        .log_component
        .rows()
        .into_iter()
        .zip(eval.log_mixture.iter())
    {
        for &lc in row {
            let w = (lc - lm).exp();
            if w > 0.0 {
                total += w * lc;
            }
        }
    }
    Ok(total)
}

/// Mixture log-likelihood `sum_i log psi(x_i; theta)`.
pub fn mixture_loglik(data: &DataMatrix, theta: &ClusterConfiguration) -> Result<f64> {
    Ok(evaluate(data, theta)?.log_mixture.sum())
}
