//! EM for Gaussian mixtures with constrained covariance models.

use ndarray::Array2;

use crate::data::{ClusterConfiguration, ClusterTriplet, DataMatrix, Partition};
use crate::error::{Error, Result};
use crate::qscore::{argmax, for_each_row, score_constant, ScoringModel};

use super::spec::{count_free_params, Backend, FitResult, MethodSpec};
use super::triplets::{constrained_covariances, eigen_floor, Moments};

/// Soft cluster size below which a component counts as empty.
const EMPTY_MASS: f64 = 1e-8;

/// M-step: proportions, means and constrained covariances from
/// responsibilities.
fn m_step(
    data: &DataMatrix,
    resp: &Array2<f64>,
    spec: &MethodSpec,
    floor: f64,
) -> Result<ClusterConfiguration> {
    let m = Moments::from_weights(data, resp);
    if let Some(empty) = m.nk.iter().position(|&nk| nk < EMPTY_MASS) {
        return Err(Error::EmptyCluster(empty));
    }
    let (sigmas, floored) = constrained_covariances(&m, spec.covariance_model, spec.gamma, floor);
    let hits = floored.iter().filter(|&&h| h).count();
    if 2 * hits > floored.len() {
        return Err(Error::DegenerateFit(format!(
            "{hits} of {} covariances hit the eigenvalue floor",
            floored.len()
        )));
    }
    let n: f64 = m.nk.iter().sum();
    let triplets =
        m.nk.iter()
            .zip(m.mu)
            .zip(sigmas)
            .map(|((&nk, mu), sigma)| ClusterTriplet::new(nk / n, mu, sigma))
            .collect();
    Ok(ClusterConfiguration::new(triplets, spec.id()))
}

/// E-step: responsibilities, mixture log-likelihood and per-point log
/// mixture density.
fn e_step(
    data: &DataMatrix,
    theta: &ClusterConfiguration,
    resp: &mut Array2<f64>,
) -> Result<(f64, Vec<f64>)> {
    let model = ScoringModel::new(theta)?;
    let c = score_constant(data.p());
    let mut buf = vec![0.0; model.k()];
    let mut scratch = vec![0.0; model.p()];
    let mut point_ll = Vec::with_capacity(data.n());
    for_each_row(data, |i, x| {
        model.scores_into(x, &mut buf, &mut scratch);
        let m = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        buf.iter_mut().for_each(|q| *q = (*q - m).exp());
        let total: f64 = buf.iter().sum();
        for (k, &e) in buf.iter().enumerate() {
            resp[[i, k]] = e / total;
        }
        point_ll.push(m + total.ln() - c);
    });
    let ll = point_ll.iter().sum();
    if !f64::is_finite(ll) {
        return Err(Error::DegenerateFit("non-finite log-likelihood".into()));
    }
    Ok((ll, point_ll))
}

fn one_hot(labels: &[usize], k: usize) -> Array2<f64> {
    let mut r = Array2::zeros((labels.len(), k));
    for (i, &l) in labels.iter().enumerate() {
        r[[i, l]] = 1.0;
    }
    r
}

fn map_labels(resp: &Array2<f64>) -> Vec<usize> {
    resp.rows()
        .into_iter()
        .map(|r| argmax(r.as_slice().expect("standard layout")))
        .collect()
}

/// Moves the worst-fitting point (lowest mixture density) from a cluster with
/// more than one member into cluster `empty`.
fn repair(labels: &mut [usize], point_ll: &[f64], k: usize, empty: usize) -> Result<()> {
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    let worst = (0..labels.len())
        .filter(|&i| counts[labels[i]] > 1)
        .min_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]).then(a.cmp(&b)))
        .ok_or(Error::EmptyCluster(empty))?;
    labels[worst] = empty;
    Ok(())
}

/// Outcome of one EM run.
#[derive(Debug, Clone)]
pub struct EmRun {
    pub theta: ClusterConfiguration,
    pub labels: Vec<usize>,
    pub loglik: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// EM started from a hard partition. Stops when the relative change in
/// log-likelihood falls below `spec.tol` or after `spec.max_iter` E-steps.
pub fn em_from_labels(data: &DataMatrix, labels: &[usize], spec: &MethodSpec) -> Result<EmRun> {
    let k = spec.k;
    let floor = eigen_floor(data);
    let mut labels = labels.to_vec();
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    let mut repaired = false;
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        // initial partition with an empty cluster: seed it with the point
        // farthest from the overall mean
        let mean = data.mean();
        let d: Vec<f64> = (0..data.n())
            .map(|i| {
                -data
                    .row(i)
                    .iter()
                    .zip(mean.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .collect();
        repair(&mut labels, &d, k, empty)?;
        repaired = true;
    }
    let mut resp = one_hot(&labels, k);

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut prev = f64::NEG_INFINITY;
    loop {
        let theta = match m_step(data, &resp, spec, floor) {
            Ok(t) => t,
            Err(Error::EmptyCluster(empty)) if !repaired && iterations > 0 => {
                repaired = true;
                let mut labels = map_labels(&resp);
                let (_, point_ll) = e_step_points(data, &resp, spec, floor)?;
                repair(&mut labels, &point_ll, k, empty)?;
                resp = one_hot(&labels, k);
                trace.clear();
                prev = f64::NEG_INFINITY;
                continue;
            }
            Err(Error::EmptyCluster(empty)) => {
                return Err(Error::DegenerateFit(format!(
                    "EM component {empty} emptied twice"
                )))
            }
            Err(e) => return Err(e),
        };
        let (ll, _) = e_step(data, &theta, &mut resp)?;
        iterations += 1;
        trace.push(ll);
        let converged = (ll - prev).abs() <= spec.tol * ll.abs();
        if converged || iterations >= spec.max_iter {
            return Ok(EmRun {
                theta,
                labels: map_labels(&resp),
                loglik: ll,
                trace,
                iterations,
                converged,
            });
        }
        prev = ll;
    }
}

/// Per-point mixture log-densities at the configuration obtained from the
/// current responsibilities with empty components dropped.
fn e_step_points(
    data: &DataMatrix,
    resp: &Array2<f64>,
    spec: &MethodSpec,
    floor: f64,
) -> Result<(f64, Vec<f64>)> {
    let keep: Vec<usize> = (0..resp.ncols())
        .filter(|&c| resp.column(c).sum() >= EMPTY_MASS)
        .collect();
    let mut sub = Array2::zeros((resp.nrows(), keep.len()));
    for (j, &c) in keep.iter().enumerate() {
        sub.column_mut(j).assign(&resp.column(c));
    }
    let mut reduced = spec.clone();
    reduced.k = keep.len();
    let theta = m_step(data, &sub, &reduced, floor)?;
    e_step(data, &theta, &mut sub)
}

/// Best-of-restarts EM fit.
pub(crate) fn fit_gaussian(
    data: &DataMatrix,
    spec: &MethodSpec,
    inits: impl Iterator<Item = Result<Vec<usize>>>,
) -> Result<FitResult> {
    let mut best: Option<EmRun> = None;
    let mut last_err = None;
    for init in inits {
        let run = init.and_then(|labels| em_from_labels(data, &labels, spec));
        match run {
            Ok(r) => {
                if best.as_ref().map_or(true, |b| r.loglik > b.loglik) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let run =
        best.ok_or_else(|| last_err.unwrap_or_else(|| Error::DegenerateFit("no restart".into())))?;
    Ok(FitResult {
        backend: Backend::GaussianEM,
        partition: Partition::new(run.labels, spec.k)?,
        theta: run.theta,
        objective: run.loglik,
        n_params: count_free_params(spec, data.p())?,
        converged: run.converged,
        iterations: run.iterations,
        loglik_trace: run.trace,
        prototypes: None,
    })
}
