//! Baseline selection criteria, all oriented so that larger is better.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backends::{fit, predict, FitResult, MethodSpec};
use crate::data::{DataMatrix, Partition};
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::qscore::{
    assignment_entropy, expected_complete_loglik, mixture_loglik, posterior_weights,
};
use crate::resampling::{bootstrap_indices, fit_stream, fold_assignment, streams};
use crate::rng::SeededRng;

/// Every criterion the selection report can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    QH,
    QS,
    CVQH,
    CVQS,
    BQH,
    BQS,
    AIC,
    BIC,
    ICL,
    CH,
    ASW,
    FW,
    CVLK,
}

impl Criterion {
    pub const ALL: [Criterion; 13] = [
        Criterion::QH,
        Criterion::QS,
        Criterion::CVQH,
        Criterion::CVQS,
        Criterion::BQH,
        Criterion::BQS,
        Criterion::AIC,
        Criterion::BIC,
        Criterion::ICL,
        Criterion::CH,
        Criterion::ASW,
        Criterion::FW,
        Criterion::CVLK,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::QH => "QH",
            Criterion::QS => "QS",
            Criterion::CVQH => "CVQH",
            Criterion::CVQS => "CVQS",
            Criterion::BQH => "BQH",
            Criterion::BQS => "BQS",
            Criterion::AIC => "AIC",
            Criterion::BIC => "BIC",
            Criterion::ICL => "ICL",
            Criterion::CH => "CH",
            Criterion::ASW => "ASW",
            Criterion::FW => "FW",
            Criterion::CVLK => "CVLK",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown criterion {s:?}")))
    }
}

/// One criterion evaluated for one method; `value` is `None` when the
/// criterion does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub method_id: String,
    pub criterion: Criterion,
    pub value: Option<f64>,
}

impl CriterionValue {
    pub fn applicable(&self) -> bool {
        self.value.is_some()
    }
}

fn loglik_of(fit: &FitResult, criterion: &'static str) -> Result<f64> {
    fit.loglik()
        .ok_or_else(|| Error::not_applicable(criterion, "backend has no likelihood"))
}

/// `(AIC, BIC) = (2 l - 2 nu, 2 l - log(n) nu)`.
pub fn aic_bic(fit: &FitResult, n: usize) -> Result<(f64, f64)> {
    let ll = loglik_of(fit, "AIC/BIC")?;
    let nu = fit.n_params as f64;
    Ok((2.0 * ll - 2.0 * nu, 2.0 * ll - (n as f64).ln() * nu))
}

/// `ICL = 2 E[clik | X] - log(n) nu` at the fitted parameters.
pub fn icl(fit: &FitResult, data: &DataMatrix) -> Result<f64> {
    loglik_of(fit, "ICL")?;
    let eclik = expected_complete_loglik(data, &fit.theta)?;
    Ok(2.0 * eclik - (data.n() as f64).ln() * fit.n_params as f64)
}

/// ICL computed as BIC penalized by the summed posterior entropy,
/// `BIC - 2 sum_i Ent_i`. Agrees with [`icl`].
pub fn icl_entropy_form(fit: &FitResult, data: &DataMatrix) -> Result<f64> {
    loglik_of(fit, "ICL")?;
    let n = data.n() as f64;
    let ll = mixture_loglik(data, &fit.theta)?;
    let bic = 2.0 * ll - n.ln() * fit.n_params as f64;
    let ent = assignment_entropy(&posterior_weights(data, &fit.theta)?);
    Ok(bic - 2.0 * n * ent)
}

/// Labels restricted to non-empty clusters, relabeled `0..K'`.
fn compact(partition: &Partition) -> Partition {
    Partition::from_ids(partition.labels())
}

fn sq_euclid(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Calinski-Harabasz ratio `B (n - K) / (W (K - 1))` with point scatters
/// over squared Euclidean dissimilarities.
pub fn calinski_harabasz(data: &DataMatrix, partition: &Partition) -> Result<f64> {
    let z = compact(partition);
    let k = z.k();
    if k < 2 {
        return Err(Error::not_applicable("CH", "needs at least two clusters"));
    }
    let n = data.n();
    let x = data.values();
    let sizes = z.sizes();
    let labels = z.labels();
    let mut total = 0.0;
    let mut within = vec![0.0; k];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = 2.0 * sq_euclid(x.row(i), x.row(j));
            total += d;
            if labels[i] == labels[j] {
                within[labels[i]] += d;
            }
        }
    }
    let w: f64 = within.iter().zip(&sizes).map(|(s, &m)| s / m as f64).sum();
    if w == 0.0 {
        return Err(Error::DegenerateScatter);
    }
    let b = total / n as f64 - w;
    Ok(b * (n - k) as f64 / (w * (k - 1) as f64))
}

/// Average silhouette width with Euclidean dissimilarity. Points in
/// singleton clusters contribute 0, as do points with `a = b = 0`.
pub fn average_silhouette_width(data: &DataMatrix, partition: &Partition) -> Result<f64> {
    let z = compact(partition);
    let k = z.k();
    if k < 2 {
        return Err(Error::not_applicable("ASW", "needs at least two clusters"));
    }
    let n = data.n();
    let x = data.values();
    let sizes = z.sizes();
    let labels = z.labels();
    let mut sum_s = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += sq_euclid(x.row(i), x.row(j)).sqrt();
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            sum_s += (b - a) / m;
        }
    }
    Ok(sum_s / n as f64)
}

/// Fraction of ordered point pairs on which two partitions disagree about
/// co-membership, `(1/n^2) sum_ij |1{a_i = a_j} - 1{b_i = b_j}|`.
pub fn co_assignment_distance(a: &Partition, b: &Partition) -> f64 {
    let n = a.n();
    let mut joint = std::collections::HashMap::new();
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        *joint.entry((x, y)).or_insert(0usize) += 1;
    }
    let sq = |v: usize| (v * v) as f64;
    let sa: f64 = a.sizes().into_iter().map(sq).sum();
    let sb: f64 = b.sizes().into_iter().map(sq).sum();
    let sab: f64 = joint.values().map(|&v| sq(v)).sum();
    (sa + sb - 2.0 * sab) / (n * n) as f64
}

/// Maximum tolerated share of failed fits in a resampling criterion.
pub const MAX_FAILURE_SHARE: f64 = 0.25;

pub(crate) fn check_failures(failures: usize, total: usize) -> Result<()> {
    if failures as f64 > MAX_FAILURE_SHARE * total as f64 {
        return Err(Error::TooManyFailures { failures, total });
    }
    Ok(())
}

/// Per-pair co-assignment distances for the FW stability criterion; `None`
/// marks a pair where either fit failed.
pub fn fw_distances(
    data: &DataMatrix,
    spec: &MethodSpec,
    b: usize,
    rng: &SeededRng,
) -> Vec<Option<f64>> {
    let n = data.n();
    map_indexed(b, |pair| {
        let mut parts = [None, None];
        for (side, slot) in parts.iter_mut().enumerate() {
            let idx = bootstrap_indices(n, &rng.derive(&[streams::FW, pair as u64, side as u64]));
            let sample = data.select_rows(&idx);
            let frng = fit_stream(rng, streams::FW, (2 * pair + side) as u64, spec);
            *slot = fit(&sample, spec, &frng)
                .and_then(|f| predict(&f, data))
                .ok();
        }
        match parts {
            [Some(a), Some(b)] => Some(co_assignment_distance(&a, &b)),
            _ => None,
        }
    })
}

/// Negated mean co-assignment distance over `b` independent bootstrap pairs.
pub fn fw_stability(
    data: &DataMatrix,
    spec: &MethodSpec,
    b: usize,
    rng: &SeededRng,
) -> Result<f64> {
    if spec.k < 2 {
        return Err(Error::not_applicable("FW", "needs at least two clusters"));
    }
    if b == 0 {
        return Err(Error::InvalidArgument(
            "FW needs at least one bootstrap pair".into(),
        ));
    }
    let d = fw_distances(data, spec, b, rng);
    let ok: Vec<f64> = d.iter().flatten().copied().collect();
    check_failures(b - ok.len(), b)?;
    Ok(-ok.iter().sum::<f64>() / ok.len() as f64)
}

/// Held-out average mixture log-likelihood per fold; `None` marks a failed
/// fold fit.
pub fn cvlk_folds(
    data: &DataMatrix,
    spec: &MethodSpec,
    folds: usize,
    rng: &SeededRng,
) -> Result<Vec<Option<f64>>> {
    if !spec.has_likelihood() {
        return Err(Error::not_applicable("CVLK", "backend has no likelihood"));
    }
    let assignment = fold_assignment(data.n(), folds, rng)?;
    let n = data.n();
    for f in &assignment {
        if n - f.len() < spec.k {
            return Err(Error::FoldTooSmall {
                size: n - f.len(),
                k: spec.k,
            });
        }
    }
    Ok(map_indexed(folds, |t| {
        let (train, test) = crate::resampling::split_fold(data, &assignment, t);
        let frng = fit_stream(rng, streams::FOLD, t as u64, spec);
        let f = fit(&train, spec, &frng).ok()?;
        let ll = mixture_loglik(&test, &f.theta).ok()?;
        Some(ll / test.n() as f64)
    }))
}

/// Cross-validated held-out average log-likelihood.
pub fn cvlk(data: &DataMatrix, spec: &MethodSpec, folds: usize, rng: &SeededRng) -> Result<f64> {
    let per_fold = cvlk_folds(data, spec, folds, rng)?;
    let ok: Vec<f64> = per_fold.iter().flatten().copied().collect();
    check_failures(folds - ok.len(), folds)?;
    Ok(ok.iter().sum::<f64>() / ok.len() as f64)
}
