//! Weighted cluster moments, model-constrained covariance estimates, and
//! conversion of any partition into cluster triplets.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::data::{ClusterConfiguration, ClusterTriplet, DataMatrix, Partition};
use crate::error::{Error, Result};

use super::erc::{constrain_eigenvalues, enforce_erc_weighted};
use super::spec::CovarianceModel;

/// Relative size of the eigenvalue floor with respect to the average
/// marginal variance of the data.
pub const FLOOR_FACTOR: f64 = 1e-8;

/// Eigenvalue floor `FLOOR_FACTOR * tr(S) / p` for the data covariance `S`.
pub fn eigen_floor(data: &DataMatrix) -> f64 {
    let p = data.p() as f64;
    let x = data.values();
    let n = data.n() as f64;
    let mut tr = 0.0;
    for col in x.columns() {
        let m = col.sum() / n;
        tr += col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    }
    (FLOOR_FACTOR * tr / p).max(1e-200)
}

/// Soft cluster sizes, means, and scatter matrices `sum_i r_ik (x_i - mu_k)(x_i - mu_k)'`.
#[derive(Debug, Clone)]
pub struct Moments {
    pub nk: Vec<f64>,
    pub mu: Vec<DVector<f64>>,
    pub scatter: Vec<DMatrix<f64>>,
}

impl Moments {
    pub fn from_weights(data: &DataMatrix, resp: &Array2<f64>) -> Self {
        let p = data.p();
        let k = resp.ncols();
        let x = data.values().as_standard_layout();
        let resp = resp.as_standard_layout();
        let rows = || {
            x.as_slice()
                .expect("standard layout")
                .chunks_exact(p.max(1))
                .zip(
                    resp.as_slice()
                        .expect("standard layout")
                        .chunks_exact(k.max(1)),
                )
        };
        let mut nk = vec![0.0; k];
        let mut mu = vec![vec![0.0; p]; k];
        for (row, weights) in rows() {
            for (c, &r) in weights.iter().enumerate() {
                if r == 0.0 {
                    continue;
                }
                nk[c] += r;
                for (m, v) in mu[c].iter_mut().zip(row) {
                    *m += r * v;
                }
            }
        }
        for c in 0..k {
            if nk[c] > 0.0 {
                mu[c].iter_mut().for_each(|m| *m /= nk[c]);
            }
        }
        // scatter_c = (r_c * D_c)' D_c with D_c the data centred at mu_c
        let n = data.n();
        let weights = resp.as_slice().expect("standard layout");
        let xs = x.as_slice().expect("standard layout");
        let mut centred = DMatrix::zeros(n, p);
        let mut weighted = DMatrix::zeros(n, p);
        let scatter = (0..k)
            .map(|c| {
                for (i, row) in xs.chunks_exact(p.max(1)).enumerate() {
                    let r = weights[i * k + c];
                    for (j, (&v, &m)) in row.iter().zip(&mu[c]).enumerate() {
                        centred[(i, j)] = v - m;
                        weighted[(i, j)] = r * (v - m);
                    }
                }
                let s = weighted.tr_mul(&centred);
                DMatrix::from_fn(p, p, |a, b| if a >= b { s[(a, b)] } else { s[(b, a)] })
            })
            .collect();
        Self {
            nk,
            mu: mu.into_iter().map(DVector::from_vec).collect(),
            scatter,
        }
    }

    pub fn from_partition(data: &DataMatrix, z: &Partition) -> Self {
        let mut resp = Array2::zeros((z.n(), z.k()));
        for (i, &l) in z.labels().iter().enumerate() {
            resp[[i, l]] = 1.0;
        }
        Self::from_weights(data, &resp)
    }

    fn pooled(&self) -> DMatrix<f64> {
        let p = self.mu[0].len();
        self.scatter
            .iter()
            .fold(DMatrix::zeros(p, p), |acc, s| acc + s)
    }
}

/// Covariance estimates under `model` with the eigen-ratio bound `gamma` and
/// eigenvalue floor. Also returns, per cluster, whether the floor was hit.
pub fn constrained_covariances(
    m: &Moments,
    model: CovarianceModel,
    gamma: f64,
    floor: f64,
) -> (Vec<DMatrix<f64>>, Vec<bool>) {
    let k = m.nk.len();
    let p = m.mu[0].len();
    let n: f64 = m.nk.iter().sum();
    let diag_of = |values: &[f64]| DMatrix::from_diagonal(&DVector::from_column_slice(values));
    // applies the constraint to a flat list of eigenvalues
    let constrain = |values: Vec<f64>, weights: Vec<f64>| -> (Vec<f64>, Vec<bool>) {
        match constrain_eigenvalues(&values, &weights, gamma, floor) {
            None => (values.clone(), vec![false; values.len()]),
            Some(new) => {
                let hit = values
                    .iter()
                    .zip(&new)
                    .map(|(&d, &l)| d < floor && l == floor)
                    .collect();
                (new, hit)
            }
        }
    };
    match model {
        CovarianceModel::VVV => {
            let sigmas: Vec<DMatrix<f64>> =
                m.scatter.iter().zip(&m.nk).map(|(s, &nk)| s / nk).collect();
            enforce_erc_weighted(&sigmas, &m.nk, gamma, floor)
        }
        CovarianceModel::EEE => {
            let (s, hit) = enforce_erc_weighted(&[m.pooled() / n], &[n], gamma, floor);
            (vec![s[0].clone(); k], vec![hit[0]; k])
        }
        CovarianceModel::VVI => {
            let values = m
                .scatter
                .iter()
                .zip(&m.nk)
                .flat_map(|(s, &nk)| (0..p).map(move |j| s[(j, j)] / nk))
                .collect();
            let weights =
                m.nk.iter()
                    .flat_map(|&nk| std::iter::repeat(nk).take(p))
                    .collect();
            let (l, hit) = constrain(values, weights);
            (
                l.chunks(p).map(diag_of).collect(),
                hit.chunks(p).map(|h| h.iter().any(|&b| b)).collect(),
            )
        }
        CovarianceModel::EEI => {
            let pooled = m.pooled();
            let values = (0..p).map(|j| pooled[(j, j)] / n).collect();
            let (l, hit) = constrain(values, vec![1.0; p]);
            let any = hit.iter().any(|&b| b);
            (vec![diag_of(&l); k], vec![any; k])
        }
        CovarianceModel::VII => {
            let values = m
                .scatter
                .iter()
                .zip(&m.nk)
                .map(|(s, &nk)| s.trace() / (nk * p as f64))
                .collect();
            let (l, hit) = constrain(values, m.nk.clone());
            (
                l.iter()
                    .map(|&v| DMatrix::from_diagonal_element(p, p, v))
                    .collect(),
                hit,
            )
        }
        CovarianceModel::EII => {
            let (l, hit) = constrain(vec![m.pooled().trace() / (n * p as f64)], vec![1.0]);
            (
                vec![DMatrix::from_diagonal_element(p, p, l[0]); k],
                vec![hit[0]; k],
            )
        }
    }
}

/// Maps a partition to cluster triplets: proportions `n_k / n`, cluster means,
/// and ML covariances regularized by the eigen-ratio bound `gamma`. A singleton
/// cluster gets a spherical covariance at the pooled average eigenvalue.
pub fn triplets_from_partition(
    data: &DataMatrix,
    partition: &Partition,
    gamma: f64,
    method_id: &str,
) -> Result<ClusterConfiguration> {
    if partition.n() != data.n() {
        return Err(Error::LengthMismatch {
            left: partition.n(),
            right: data.n(),
        });
    }
    let sizes = partition.sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(empty));
    }
    let floor = eigen_floor(data);
    let m = Moments::from_partition(data, partition);
    let p = data.p();
    let n = data.n();
    let pooled_level = (m.pooled().trace() / (n * p) as f64).max(floor);
    let sigmas: Vec<DMatrix<f64>> = m
        .scatter
        .iter()
        .zip(&sizes)
        .map(|(s, &nk)| {
            if nk == 1 {
                DMatrix::from_diagonal_element(p, p, pooled_level)
            } else {
                s / nk as f64
            }
        })
        .collect();
    let weights: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let (sigmas, _) = enforce_erc_weighted(&sigmas, &weights, gamma, floor);
    let triplets = sigmas
        .into_iter()
        .zip(m.mu)
        .zip(&sizes)
        .map(|((sigma, mu), &nk)| ClusterTriplet::new(nk as f64 / n as f64, mu, sigma))
        .collect();
    Ok(ClusterConfiguration::new(triplets, method_id))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_collinear_points() {
        let d = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let z = Partition::new(vec![0, 0, 0], 1).unwrap();
        let theta = triplets_from_partition(&d, &z, f64::INFINITY, "t").unwrap();
        let t = &theta.triplets[0];
        assert_eq!(t.pi, 1.0);
        assert_eq!(t.mu.as_slice(), &[1.0, 0.0]);
        let floor = 1e-8 * (2.0 / 3.0) / 2.0;
        assert!((t.sigma[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((t.sigma[(1, 1)] - floor).abs() < 1e-20);
        assert!(t.sigma[(0, 1)].abs() < 1e-20);
    }

    #[test]
    fn symmetric_singletons_with_unit_gamma() {
        let d = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 1.0]]).unwrap();
        let z = Partition::new(vec![0, 1], 2).unwrap();
        let theta = triplets_from_partition(&d, &z, 1.0, "t").unwrap();
        let (a, b) = (&theta.triplets[0].sigma, &theta.triplets[1].sigma);
        assert_eq!(a, b);
        assert_eq!(a[(0, 0)], a[(1, 1)]);
        assert_eq!(a[(0, 1)], 0.0);
    }

    #[test]
    fn proportions_are_exact_rationals() {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let d = DataMatrix::from_rows(&rows).unwrap();
        let z = Partition::new(vec![0, 0, 1, 1, 1, 2, 2], 3).unwrap();
        let theta = triplets_from_partition(&d, &z, 1e4, "t").unwrap();
        let pis: Vec<f64> = theta.triplets.iter().map(|t| t.pi).collect();
        assert_eq!(pis, vec![2.0 / 7.0, 3.0 / 7.0, 2.0 / 7.0]);
    }

    #[test]
    fn empty_cluster_is_an_error() {
        let d = DataMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let z = Partition::new(vec![0, 0], 2).unwrap();
        assert!(matches!(
            triplets_from_partition(&d, &z, 10.0, "t"),
            Err(Error::EmptyCluster(1))
        ));
    }

    #[test]
    fn pooled_models_share_covariance() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![(i % 3) as f64, (i % 4) as f64 * 0.5])
            .collect();
        let d = DataMatrix::from_rows(&rows).unwrap();
        let z = Partition::new((0..10).map(|i| i % 2).collect(), 2).unwrap();
        let m = Moments::from_partition(&d, &z);
        for model in [
            CovarianceModel::EII,
            CovarianceModel::EEI,
            CovarianceModel::EEE,
        ] {
            let (s, _) = constrained_covariances(&m, model, f64::INFINITY, 1e-12);
            assert_eq!(s[0], s[1]);
        }
        let (s, _) = constrained_covariances(&m, CovarianceModel::EII, f64::INFINITY, 1e-12);
        let pooled = (&m.scatter[0] + &m.scatter[1]).trace() / 20.0;
        assert!((s[0][(0, 0)] - pooled).abs() < 1e-14);
    }
}
