//! Eigen-ratio constraint: all eigenvalues of all cluster scatter matrices
//! must lie in a common interval `[m, gamma * m]`.
//!
//! Eigenvalues are truncated to the interval, with `m` chosen to minimize the
//! weighted Gaussian deviance `sum_j w_j (log l_j + d_j / l_j)` where `d_j` are
//! the raw eigenvalues and `l_j` the truncated ones. The objective is piecewise
//! smooth in `m` with breakpoints at `d_j` and `d_j / gamma`; on each piece the
//! optimum has a closed form, so scanning the pieces gives the exact minimizer.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::symmetrize_lower;

/// Relative slack when checking whether the constraint already holds.
const FEASIBILITY_SLACK: f64 = 1e-9;

/// Truncates `values` into `[m, gamma * m]` with `m >= floor`.
///
/// Returns `None` when the values already satisfy the constraint, so callers
/// can keep their inputs untouched.
pub fn constrain_eigenvalues(
    values: &[f64],
    weights: &[f64],
    gamma: f64,
    floor: f64,
) -> Option<Vec<f64>> {
    debug_assert_eq!(values.len(), weights.len());
    debug_assert!(gamma >= 1.0);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || (min >= floor && max <= gamma * min * (1.0 + FEASIBILITY_SLACK)) {
        return None;
    }
    if gamma.is_infinite() {
        return Some(values.iter().map(|&d| d.max(floor)).collect());
    }

    // a truncated value is m, gamma * m or d itself, so two logs per m suffice
    let log_values: Vec<f64> = values.iter().map(|d| d.ln()).collect();
    let objective = |m: f64| -> f64 {
        let upper = gamma * m;
        let (log_m, log_upper) = (m.ln(), upper.ln());
        values
            .iter()
            .zip(weights)
            .zip(&log_values)
            .map(|((&d, &w), &log_d)| {
                if d < m {
                    w * (log_m + d / m)
                } else if d > upper {
                    w * (log_upper + d / upper)
                } else {
                    w * (log_d + 1.0)
                }
            })
            .sum()
    };

    let mut knots: Vec<f64> = values
        .iter()
        .flat_map(|&d| [d, d / gamma])
        .filter(|&b| b > floor)
        .collect();
    knots.push(floor);
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let lowest = floor.max(f64::MIN_POSITIVE);
    let mut best_m = knots[0].max(lowest);
    let mut best_f = objective(best_m);
    let mut consider = |m: f64| {
        let m = m.max(lowest);
        let f = objective(m);
        if f < best_f {
            best_f = f;
            best_m = m;
        }
    };
    for (idx, &lo) in knots.iter().enumerate() {
        let hi = knots.get(idx + 1).copied().unwrap_or(f64::INFINITY);
        consider(lo);
        let probe = if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            2.0 * lo.max(lowest)
        };
        let (mut num, mut den) = (0.0, 0.0);
        for (&d, &w) in values.iter().zip(weights) {
            if d < probe {
                num += w * d;
                den += w;
            } else if d > gamma * probe {
                num += w * d / gamma;
                den += w;
            }
        }
        if den > 0.0 {
            consider((num / den).clamp(lo, hi));
        }
    }
    Some(
        values
            .iter()
            .map(|&d| d.clamp(best_m, gamma * best_m))
            .collect(),
    )
}

/// Constrains a set of symmetric positive-definite matrices so that the
/// ratio of the largest to the smallest eigenvalue across all of them is at
/// most `gamma`. Eigenvectors are kept. Inputs that already satisfy the bound
/// are returned unchanged.
pub fn enforce_erc(sigmas: &[DMatrix<f64>], gamma: f64) -> Vec<DMatrix<f64>> {
    let weights = vec![1.0; sigmas.len()];
    enforce_erc_weighted(sigmas, &weights, gamma, 0.0).0
}

/// Weighted form used by the M-step: each matrix's eigenvalues carry the
/// weight of its cluster, and `m` is bounded below by `floor`. The second
/// return value flags matrices that had an eigenvalue lifted to the floor.
pub fn enforce_erc_weighted(
    sigmas: &[DMatrix<f64>],
    weights: &[f64],
    gamma: f64,
    floor: f64,
) -> (Vec<DMatrix<f64>>, Vec<bool>) {
    let eigs: Vec<SymmetricEigen<f64, nalgebra::Dyn>> = sigmas
        .iter()
        .map(|s| SymmetricEigen::new(s.clone()))
        .collect();
    let values: Vec<f64> = eigs
        .iter()
        .flat_map(|e| e.eigenvalues.iter().copied())
        .collect();
    let w: Vec<f64> = eigs
        .iter()
        .zip(weights)
        .flat_map(|(e, &wk)| std::iter::repeat(wk).take(e.eigenvalues.len()))
        .collect();
    let Some(new_values) = constrain_eigenvalues(&values, &w, gamma, floor) else {
        return (sigmas.to_vec(), vec![false; sigmas.len()]);
    };
    let mut out = Vec::with_capacity(sigmas.len());
    let mut floored = Vec::with_capacity(sigmas.len());
    let mut offset = 0;
    for e in &eigs {
        let p = e.eigenvalues.len();
        let lam = &new_values[offset..offset + p];
        floored.push(
            values[offset..offset + p]
                .iter()
                .zip(lam)
                .any(|(&d, &l)| d < floor && l == floor),
        );
        offset += p;
        let v = &e.eigenvectors;
        let mut s = DMatrix::zeros(p, p);
        for (j, &l) in lam.iter().enumerate() {
            let col = v.column(j);
            s += l * col * col.transpose();
        }
        symmetrize_lower(&mut s);
        out.push(s);
    }
    (out, floored)
}

/// Ratio of the largest to the smallest eigenvalue over all matrices.
pub fn eigen_ratio(sigmas: &[DMatrix<f64>]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in sigmas {
        for &l in SymmetricEigen::new(s.clone()).eigenvalues.iter() {
            lo = lo.min(l);
            hi = hi.max(l);
        }
    }
    hi / lo
}
