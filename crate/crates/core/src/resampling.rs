//! In-sample, cross-validated and bootstrap quadratic scores, and selection
//! over a menu of methods.
//!
//! Random streams are keyed by the work unit (bootstrap replicate, fold) so
//! every method in a menu sees the same resamples, and by the method id for
//! the fit itself. Results do not depend on the execution schedule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backends::{fit, Backend, CovarianceModel, FitResult, MethodSpec};
use crate::criteria::{self, check_failures, Criterion};
use crate::data::{ClusterConfiguration, DataMatrix, Partition};
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::qscore::{ScoreMode, ScoringModel};
use crate::rng::{str_hash, SeededRng};

/// Stream tags separating the random draws of different procedures.
pub mod streams {
    pub const BOOT: u64 = 0xb007;
    pub const FOLD: u64 = 0xf01d;
    pub const FW: u64 = 0xf3;
    pub const FIT: u64 = 0xf17;
    pub const TIE: u64 = 0x71e;
    pub const FULL: u64 = 0xa11;
}

/// Row indices of a bootstrap resample of size `n`.
pub fn bootstrap_indices(n: usize, rng: &SeededRng) -> Vec<usize> {
    let mut r = rng.clone();
    (0..n).map(|_| r.below(n)).collect()
}

/// Random split of `0..n` into `folds` groups whose sizes differ by at most
/// one. Each group is sorted.
pub fn fold_assignment(n: usize, folds: usize, rng: &SeededRng) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} points into {folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.derive(&[streams::FOLD]).shuffle(&mut order);
    let mut out = vec![Vec::with_capacity(n / folds + 1); folds];
    for (pos, &i) in order.iter().enumerate() {
        out[pos % folds].push(i);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    Ok(out)
}

/// Training complement and held-out fold `t`.
pub fn split_fold(data: &DataMatrix, folds: &[Vec<usize>], t: usize) -> (DataMatrix, DataMatrix) {
    let mut held = vec![false; data.n()];
    folds[t].iter().for_each(|&i| held[i] = true);
    let train: Vec<usize> = (0..data.n()).filter(|&i| !held[i]).collect();
    (data.select_rows(&train), data.select_rows(&folds[t]))
}

/// Stream for fitting `spec` in work unit `(tag, unit)`.
pub fn fit_stream(rng: &SeededRng, tag: u64, unit: u64, spec: &MethodSpec) -> SeededRng {
    rng.derive(&[streams::FIT, tag, unit, str_hash(&spec.id())])
}

/// Hard or smooth score, by mode.
pub fn in_sample_score(
    data: &DataMatrix,
    theta: &ClusterConfiguration,
    mode: ScoreMode,
) -> Result<f64> {
    crate::qscore::score(data, theta, mode)
}

/// Hard and smooth scores of `theta` on `data` in one pass.
fn both_scores(data: &DataMatrix, theta: &ClusterConfiguration) -> Result<[f64; 2]> {
    let model = ScoringModel::new(theta)?;
    Ok([
        model.mean_score(data, ScoreMode::Hard),
        model.mean_score(data, ScoreMode::Smooth),
    ])
}

fn mode_index(mode: ScoreMode) -> usize {
    match mode {
        ScoreMode::Hard => 0,
        ScoreMode::Smooth => 1,
    }
}

/// Percentile summary of bootstrap replicate scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapScore {
    pub replicate_scores: Vec<f64>,
    pub w_tilde: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub failures: usize,
}

/// `inf { r : F(r) >= level }` for the empirical distribution of `sorted`.
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let b = sorted.len();
    // guard against level * b landing just above an integer
    let rank = ((level * b as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(b) - 1]
}

impl BootstrapScore {
    /// Builds the summary from successful replicate scores computed on a
    /// sample of size `n`. The bounds come from quantiles of
    /// `R = sqrt(n) (S - W)` mapped back to the score scale.
    pub fn from_replicates(scores: Vec<f64>, n: usize, alpha: f64, failures: usize) -> Self {
        let b = scores.len();
        let w_tilde = scores.iter().sum::<f64>() / b as f64;
        let root_n = (n as f64).sqrt();
        let mut r: Vec<f64> = scores.iter().map(|s| root_n * (s - w_tilde)).collect();
        r.sort_by(f64::total_cmp);
        let lower = w_tilde + empirical_quantile(&r, alpha / 2.0) / root_n;
        let upper = w_tilde + empirical_quantile(&r, 1.0 - alpha / 2.0) / root_n;
        Self {
            replicate_scores: scores,
            w_tilde,
            lower,
            upper,
            alpha,
            failures,
        }
    }
}

/// Cross-validated score summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub adjusted: f64,
    pub delta: f64,
    pub failures: usize,
}

impl CvScore {
    pub fn from_folds(scores: Vec<f64>, delta: f64, failures: usize) -> Self {
        let k = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / k;
        let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
        let sd = if scores.len() > 1 {
            (ss / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            fold_scores: scores,
            mean,
            sd,
            adjusted: mean - delta * sd / k.sqrt(),
            delta,
            failures,
        }
    }
}

/// Bootstrap replicate scores `[hard, smooth]` for each method in `specs`;
/// replicate `b` uses the same resample for every method.
pub fn bootstrap_replicates(
    data: &DataMatrix,
    specs: &[MethodSpec],
    b: usize,
    rng: &SeededRng,
) -> Vec<Vec<Option<[f64; 2]>>> {
    let n = data.n();
    let m = specs.len();
    let flat = map_indexed(m * b, |j| {
        let (mi, rep) = (j / b, j % b);
        let spec = &specs[mi];
        let idx = bootstrap_indices(n, &rng.derive(&[streams::BOOT, rep as u64]));
        let sample = data.select_rows(&idx);
        let frng = fit_stream(rng, streams::BOOT, rep as u64, spec);
        fit(&sample, spec, &frng)
            .and_then(|f| both_scores(data, &f.theta))
            .ok()
    });
    flat.chunks(b.max(1)).map(<[_]>::to_vec).collect()
}

fn summarize_bootstrap(
    reps: &[Option<[f64; 2]>],
    n: usize,
    mode: ScoreMode,
    alpha: f64,
) -> Result<BootstrapScore> {
    let scores: Vec<f64> = reps.iter().flatten().map(|s| s[mode_index(mode)]).collect();
    let failures = reps.len() - scores.len();
    check_failures(failures, reps.len())?;
    Ok(BootstrapScore::from_replicates(scores, n, alpha, failures))
}

fn check_bootstrap_args(b: usize, alpha: f64) -> Result<()> {
    if b < 2 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs b >= 2, got {b}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Bootstrap estimate of the expected score of the configuration produced
/// by `spec`: refit on `b` resamples, score each refit on the original
/// sample, and summarize with percentile bounds at level `alpha`.
pub fn bootstrap_score(
    data: &DataMatrix,
    spec: &MethodSpec,
    mode: ScoreMode,
    b: usize,
    alpha: f64,
    rng: &SeededRng,
) -> Result<BootstrapScore> {
    check_bootstrap_args(b, alpha)?;
    let reps = bootstrap_replicates(data, std::slice::from_ref(spec), b, rng);
    summarize_bootstrap(&reps[0], data.n(), mode, alpha)
}

/// Held-out fold scores `[hard, smooth]` per method; every method sees the
/// same folds.
pub fn cv_replicates(
    data: &DataMatrix,
    specs: &[MethodSpec],
    folds: usize,
    rng: &SeededRng,
) -> Result<Vec<Vec<Option<[f64; 2]>>>> {
    let assignment = fold_assignment(data.n(), folds, rng)?;
    let splits: Vec<(DataMatrix, DataMatrix)> = (0..folds)
        .map(|t| split_fold(data, &assignment, t))
        .collect();
    let flat = map_indexed(specs.len() * folds, |j| {
        let (mi, t) = (j / folds, j % folds);
        let spec = &specs[mi];
        let (train, test) = &splits[t];
        let frng = fit_stream(rng, streams::FOLD, t as u64, spec);
        fit(train, spec, &frng)
            .and_then(|f| both_scores(test, &f.theta))
            .ok()
    });
    Ok(flat.chunks(folds).map(<[_]>::to_vec).collect())
}

fn summarize_cv(reps: &[Option<[f64; 2]>], mode: ScoreMode, delta: f64) -> Result<CvScore> {
    let scores: Vec<f64> = reps.iter().flatten().map(|s| s[mode_index(mode)]).collect();
    let failures = reps.len() - scores.len();
    check_failures(failures, reps.len())?;
    Ok(CvScore::from_folds(scores, delta, failures))
}

fn check_cv_args(data: &DataMatrix, spec: &MethodSpec, folds: usize, delta: f64) -> Result<()> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "delta must be >= 0, got {delta}"
        )));
    }
    let smallest_train = data.n() - data.n().div_ceil(folds);
    if smallest_train < spec.k {
        return Err(Error::FoldTooSmall {
            size: smallest_train,
            k: spec.k,
        });
    }
    Ok(())
}

/// k-fold cross-validated score: fit on the complement of each fold, score
/// the held-out fold, and penalize the mean by `delta` standard errors.
pub fn cv_score(
    data: &DataMatrix,
    spec: &MethodSpec,
    mode: ScoreMode,
    folds: usize,
    delta: f64,
    rng: &SeededRng,
) -> Result<CvScore> {
    check_cv_args(data, spec, folds, delta)?;
    let reps = cv_replicates(data, std::slice::from_ref(spec), folds, rng)?;
    summarize_cv(&reps[0], mode, delta)
}

/// Index of the maximal applicable value; exact ties are broken by a draw
/// from `rng`.
pub fn select(values: &[Option<f64>], rng: &SeededRng) -> Result<usize> {
    let best = values
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == Some(best))
        .map(|(i, _)| i)
        .collect();
    match tied.len() {
        0 => Err(Error::NoApplicableMethod("no applicable values".into())),
        1 => Ok(tied[0]),
        t => Ok(tied[rng.derive(&[streams::TIE]).below(t)]),
    }
}

/// Resampling and criterion settings for a menu evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOptions {
    pub criteria: Vec<Criterion>,
    pub b: usize,
    pub alpha: f64,
    pub folds: usize,
    pub delta: f64,
    /// Bootstrap pairs for the FW criterion.
    pub fw_pairs: usize,
    /// Folds for CVLK.
    pub cvlk_folds: usize,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        Self {
            criteria: Criterion::ALL.to_vec(),
            b: 1000,
            alpha: 0.05,
            folds: 10,
            delta: 1.96,
            fw_pairs: 100,
            cvlk_folds: 10,
        }
    }
}

/// Resampling summaries kept alongside the criterion values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method_id: String,
    pub backend: Backend,
    pub k: usize,
    pub covariance_model: Option<CovarianceModel>,
    #[serde(with = "crate::backends::spec::gamma_serde")]
    pub gamma: f64,
    /// Applicable criterion values, maximization-oriented.
    pub values: BTreeMap<Criterion, f64>,
    /// Why a requested criterion is missing.
    pub notes: BTreeMap<Criterion, String>,
    pub bootstrap_hard: Option<BootstrapScore>,
    pub bootstrap_smooth: Option<BootstrapScore>,
    pub cv_hard: Option<CvScore>,
    pub cv_smooth: Option<CvScore>,
    pub fit_error: Option<String>,
    /// Partition of the full-sample fit.
    #[serde(skip)]
    pub partition: Option<Partition>,
    /// Free parameters of the full-sample fit.
    pub n_params: Option<usize>,
}

/// Criterion values for every method and the method selected by each
/// criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub rows: Vec<MethodRow>,
    /// Row index selected by each criterion.
    pub selected: BTreeMap<Criterion, usize>,
    /// Criteria whose selection involved a random tie-break.
    pub ties: BTreeMap<Criterion, Vec<usize>>,
    pub options: EvaluationOptions,
    pub seed: u64,
}

impl SelectionReport {
    pub fn selected_row(&self, c: Criterion) -> Option<&MethodRow> {
        self.selected.get(&c).map(|&i| &self.rows[i])
    }
}

/// Fits on the full sample and the criterion values that only need that
/// fit.
fn in_sample_values(
    data: &DataMatrix,
    fit: &FitResult,
    wanted: &[Criterion],
    values: &mut BTreeMap<Criterion, f64>,
    notes: &mut BTreeMap<Criterion, String>,
) {
    let mut record = |c: Criterion, r: std::result::Result<f64, String>| match r {
        Ok(v) => {
            values.insert(c, v);
        }
        Err(e) => {
            notes.insert(c, e);
        }
    };
    let want = |c| wanted.contains(&c);
    let err = |e: Error| e.to_string();
    if want(Criterion::QH) || want(Criterion::QS) {
        let scores = both_scores(data, &fit.theta).map_err(err);
        if want(Criterion::QH) {
            record(Criterion::QH, scores.clone().map(|s| s[0]));
        }
        if want(Criterion::QS) {
            record(Criterion::QS, scores.map(|s| s[1]));
        }
    }
    if want(Criterion::AIC) || want(Criterion::BIC) {
        let ab = criteria::aic_bic(fit, data.n()).map_err(err);
        if want(Criterion::AIC) {
            record(Criterion::AIC, ab.clone().map(|v| v.0));
        }
        if want(Criterion::BIC) {
            record(Criterion::BIC, ab.map(|v| v.1));
        }
    }
    if want(Criterion::ICL) {
        record(Criterion::ICL, criteria::icl(fit, data).map_err(err));
    }
    if want(Criterion::CH) {
        record(
            Criterion::CH,
            criteria::calinski_harabasz(data, &fit.partition).map_err(err),
        );
    }
    if want(Criterion::ASW) {
        record(
            Criterion::ASW,
            criteria::average_silhouette_width(data, &fit.partition).map_err(err),
        );
    }
}

/// Evaluates every requested criterion for every method in `menu` and
/// selects one method per criterion.
pub fn evaluate_menu(
    data: &DataMatrix,
    menu: &[MethodSpec],
    options: &EvaluationOptions,
    rng: &SeededRng,
) -> Result<SelectionReport> {
    if menu.is_empty() {
        return Err(Error::InvalidArgument("empty method menu".into()));
    }
    let wanted = &options.criteria;
    let want = |c| wanted.contains(&c);
    let n = data.n();

    let fits = map_indexed(menu.len(), |mi| {
        fit(
            data,
            &menu[mi],
            &fit_stream(rng, streams::FULL, 0, &menu[mi]),
        )
    });
    let mut rows: Vec<MethodRow> = menu
        .iter()
        .zip(&fits)
        .map(|(spec, f)| {
            let mut row = MethodRow {
                method_id: spec.id(),
                backend: spec.backend,
                k: spec.k,
                covariance_model: spec.has_likelihood().then_some(spec.covariance_model),
                gamma: spec.gamma,
                values: BTreeMap::new(),
                notes: BTreeMap::new(),
                bootstrap_hard: None,
                bootstrap_smooth: None,
                cv_hard: None,
                cv_smooth: None,
                fit_error: None,
                partition: None,
                n_params: None,
            };
            match f {
                Ok(f) => {
                    in_sample_values(data, f, wanted, &mut row.values, &mut row.notes);
                    row.partition = Some(f.partition.clone());
                    row.n_params = Some(f.n_params);
                }
                Err(e) => row.fit_error = Some(e.to_string()),
            }
            row
        })
        .collect();

    if want(Criterion::BQH) || want(Criterion::BQS) {
        check_bootstrap_args(options.b, options.alpha)?;
        let reps = bootstrap_replicates(data, menu, options.b, rng);
        for (row, rep) in rows.iter_mut().zip(&reps) {
            for (crit, mode) in [
                (Criterion::BQH, ScoreMode::Hard),
                (Criterion::BQS, ScoreMode::Smooth),
            ] {
                if !want(crit) {
                    continue;
                }
                match summarize_bootstrap(rep, n, mode, options.alpha) {
                    Ok(s) => {
                        row.values.insert(crit, s.lower);
                        match mode {
                            ScoreMode::Hard => row.bootstrap_hard = Some(s),
                            ScoreMode::Smooth => row.bootstrap_smooth = Some(s),
                        }
                    }
                    Err(e) => {
                        log::warn!("{} {crit}: {e}", row.method_id);
                        row.notes.insert(crit, e.to_string());
                    }
                }
            }
        }
    }

    if want(Criterion::CVQH) || want(Criterion::CVQS) {
        let reps = cv_replicates(data, menu, options.folds, rng)?;
        for ((row, rep), spec) in rows.iter_mut().zip(&reps).zip(menu) {
            for (crit, mode) in [
                (Criterion::CVQH, ScoreMode::Hard),
                (Criterion::CVQS, ScoreMode::Smooth),
            ] {
                if !want(crit) {
                    continue;
                }
                let r = check_cv_args(data, spec, options.folds, options.delta)
                    .and_then(|_| summarize_cv(rep, mode, options.delta));
                match r {
                    Ok(s) => {
                        row.values.insert(crit, s.adjusted);
                        match mode {
                            ScoreMode::Hard => row.cv_hard = Some(s),
                            ScoreMode::Smooth => row.cv_smooth = Some(s),
                        }
                    }
                    Err(e) => {
                        log::warn!("{} {crit}: {e}", row.method_id);
                        row.notes.insert(crit, e.to_string());
                    }
                }
            }
        }
    }

    if want(Criterion::FW) {
        for (row, spec) in rows.iter_mut().zip(menu) {
            match criteria::fw_stability(data, spec, options.fw_pairs, rng) {
                Ok(v) => {
                    row.values.insert(Criterion::FW, v);
                }
                Err(e) => {
                    row.notes.insert(Criterion::FW, e.to_string());
                }
            }
        }
    }

    if want(Criterion::CVLK) {
        for (row, spec) in rows.iter_mut().zip(menu) {
            match criteria::cvlk(data, spec, options.cvlk_folds, rng) {
                Ok(v) => {
                    row.values.insert(Criterion::CVLK, v);
                }
                Err(e) => {
                    row.notes.insert(Criterion::CVLK, e.to_string());
                }
            }
        }
    }

    let mut selected = BTreeMap::new();
    let mut ties = BTreeMap::new();
    for &c in wanted {
        let values: Vec<Option<f64>> = rows.iter().map(|r| r.values.get(&c).copied()).collect();
        match select(&values, &rng.derive(&[c as u64])) {
            Ok(i) => {
                let best = values[i];
                let tied: Vec<usize> = (0..values.len()).filter(|&j| values[j] == best).collect();
                if tied.len() > 1 {
                    ties.insert(c, tied);
                }
                selected.insert(c, i);
            }
            Err(_) => log::warn!("no applicable method for {c}"),
        }
    }

    Ok(SelectionReport {
        rows,
        selected,
        ties,
        options: options.clone(),
        seed: rng.seed(),
    })
}
