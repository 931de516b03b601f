//! Clustering backends that populate the candidate set: k-means, PAM
//! k-medoids, and Gaussian-mixture EM.

pub mod erc;
pub mod gmm;
pub mod kmeans;
pub mod kmedoids;
pub mod spec;
pub mod triplets;

use ndarray::Array2;

use crate::data::{DataMatrix, Partition};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub use erc::{enforce_erc, enforce_erc_weighted};
pub use spec::{
    count_free_params, Backend, CovarianceModel, FitResult, Init, MethodSpec, PARTITION_GAMMA,
};
pub use triplets::triplets_from_partition;

/// Random partition with every cluster non-empty.
fn random_partition(n: usize, k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut labels = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = if pos < k { pos } else { rng.below(k) };
    }
    labels
}

fn centers_of(data: &DataMatrix, labels: &[usize], k: usize) -> Array2<f64> {
    let mut c = Array2::zeros((k, data.p()));
    let mut counts = vec![0.0; k];
    for (i, &l) in labels.iter().enumerate() {
        let mut row = c.row_mut(l);
        row += &data.row(i);
        counts[l] += 1.0;
    }
    for (l, &cnt) in counts.iter().enumerate() {
        if cnt > 0.0 {
            c.row_mut(l).mapv_inplace(|v| v / cnt);
        }
    }
    c
}

/// Starting partition for one restart.
fn initial_labels(data: &DataMatrix, spec: &MethodSpec, rng: &mut SeededRng) -> Result<Vec<usize>> {
    match spec.init {
        Init::KMeansPlusPlus => Ok(kmeans::kmeans(data, spec.k, 100, rng)?.labels),
        Init::PamBuild => Ok(kmedoids::pam(data, spec.k, 100, None)?.labels),
        Init::RandomPartition => Ok(random_partition(data.n(), spec.k, rng)),
    }
}

/// Fits one method. Each restart draws from its own stream derived from
/// `rng`, and the best restart by the backend's objective is returned.
pub fn fit(data: &DataMatrix, spec: &MethodSpec, rng: &SeededRng) -> Result<FitResult> {
    spec.validate()?;
    let (n, k) = (data.n(), spec.k);
    if k > n {
        return Err(Error::NotEnoughPoints { k, n });
    }
    let restart_rng = |r: usize| rng.derive(&[r as u64]);
    match spec.backend {
        Backend::GaussianEM => gmm::fit_gaussian(
            data,
            spec,
            (0..spec.restarts).map(|r| initial_labels(data, spec, &mut restart_rng(r))),
        ),
        Backend::KMeans => {
            let mut best: Option<kmeans::KMeansFit> = None;
            let mut last_err = None;
            for r in 0..spec.restarts {
                let mut rr = restart_rng(r);
                let centers = match spec.init {
                    Init::KMeansPlusPlus => kmeans::kmeans_plus_plus(data, k, &mut rr),
                    Init::RandomPartition => centers_of(data, &random_partition(n, k, &mut rr), k),
                    Init::PamBuild => {
                        let diss = kmedoids::euclidean_dissimilarity(data);
                        let medoids = kmedoids::build(&diss, n, k);
                        data.select_rows(&medoids).values().clone()
                    }
                };
                match kmeans::lloyd(data, centers, spec.max_iter) {
                    Ok(f) if best.as_ref().map_or(true, |b| f.sse < b.sse) => best = Some(f),
                    Ok(_) => {}
                    Err(e) => last_err = Some(e),
                }
            }
            let f = best.ok_or_else(|| last_err.expect("at least one restart"))?;
            partition_result(
                data,
                spec,
                Partition::new(f.labels, k)?,
                f.sse,
                f.converged,
                f.iterations,
                f.centers,
            )
        }
        Backend::KMedoids => {
            let mut best: Option<kmedoids::PamFit> = None;
            let restarts = if spec.init == Init::PamBuild {
                1
            } else {
                spec.restarts
            };
            for r in 0..restarts {
                let f = match spec.init {
                    Init::PamBuild => kmedoids::pam(data, k, spec.max_iter, None)?,
                    _ => kmedoids::pam(data, k, spec.max_iter, Some(&mut restart_rng(r)))?,
                };
                if best.as_ref().map_or(true, |b| f.cost < b.cost) {
                    best = Some(f);
                }
            }
            let f = best.expect("at least one restart");
            let protos = data.select_rows(&f.medoids).values().clone();
            partition_result(
                data,
                spec,
                Partition::new(f.labels, k)?,
                f.cost,
                f.converged,
                f.swaps,
                protos,
            )
        }
    }
}

fn partition_result(
    data: &DataMatrix,
    spec: &MethodSpec,
    partition: Partition,
    objective: f64,
    converged: bool,
    iterations: usize,
    prototypes: Array2<f64>,
) -> Result<FitResult> {
    Ok(FitResult {
        backend: spec.backend,
        theta: triplets_from_partition(data, &partition, spec.gamma, &spec.id())?,
        partition,
        objective,
        n_params: spec.k * data.p(),
        converged,
        iterations,
        loglik_trace: Vec::new(),
        prototypes: Some(prototypes),
    })
}

/// Assigns the points of `data` with the fitted clustering: nearest prototype
/// for k-means and k-medoids, maximum quadratic score for Gaussian EM.
pub fn predict(fit: &FitResult, data: &DataMatrix) -> Result<Partition> {
    match &fit.prototypes {
        Some(protos) => {
            let labels = data
                .values()
                .rows()
                .into_iter()
                .map(|x| {
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (c, p) in protos.rows().into_iter().enumerate() {
                        let d = kmeans::sq_dist(x, p);
                        if d < best_d {
                            best_d = d;
                            best = c;
                        }
                    }
                    best
                })
                .collect();
            Partition::new(labels, protos.nrows())
        }
        None => crate::qscore::quadratic_partition(data, &fit.theta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qscore::mixture_loglik;

    fn blobs(rng: &mut SeededRng) -> (DataMatrix, Vec<usize>) {
        let normal = rand_distr::StandardNormal;
        use rand::Rng;
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for i in 0..100 {
            let c = if i % 2 == 0 { 5.0 } else { -5.0 };
            let a: f64 = rng.sample(normal);
            let b: f64 = rng.sample(normal);
            rows.push(vec![c + 0.1 * a, 0.1 * b]);
            truth.push(i % 2);
        }
        (DataMatrix::from_rows(&rows).unwrap(), truth)
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        a.iter().zip(b).all(|(&x, &y)| (a[0] == x) == (b[0] == y))
    }

    #[test]
    fn every_backend_recovers_two_blobs() {
        let mut rng = SeededRng::new(8, 0);
        let (d, truth) = blobs(&mut rng);
        for spec in [
            MethodSpec::kmeans(2),
            MethodSpec::kmedoids(2),
            MethodSpec::gaussian(2, CovarianceModel::VVV, f64::INFINITY),
            MethodSpec::gaussian(2, CovarianceModel::EII, f64::INFINITY),
        ] {
            let f = fit(&d, &spec, &rng).unwrap();
            assert!(
                same_partition(f.partition.labels(), &truth),
                "{}",
                spec.id()
            );
            assert_eq!(f.partition.k(), f.theta.k());
        }
    }

    #[test]
    fn single_component_em_is_closed_form() {
        let mut rng = SeededRng::new(9, 0);
        let (d, _) = blobs(&mut rng);
        let f = fit(
            &d,
            &MethodSpec::gaussian(1, CovarianceModel::VVV, f64::INFINITY),
            &rng,
        )
        .unwrap();
        let t = &f.theta.triplets[0];
        assert!((&t.mu - d.mean()).amax() < 1e-12);
        assert!((&t.sigma - d.covariance_ml()).amax() < 1e-10);
        let ll = mixture_loglik(&d, &f.theta).unwrap();
        assert!((f.loglik().unwrap() - ll).abs() < 1e-9 * ll.abs());
    }

    #[test]
    fn k_above_n_is_rejected() {
        let d = DataMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        for spec in [
            MethodSpec::kmeans(3),
            MethodSpec::kmedoids(3),
            MethodSpec::gaussian(3, CovarianceModel::EII, 1.0),
        ] {
            assert!(matches!(
                fit(&d, &spec, &SeededRng::new(0, 0)),
                Err(Error::NotEnoughPoints { k: 3, n: 2 })
            ));
        }
    }

    #[test]
    fn unit_gamma_vvv_gives_equal_spherical_covariances() {
        let mut rng = SeededRng::new(10, 0);
        let (d, _) = blobs(&mut rng);
        let f = fit(
            &d,
            &MethodSpec::gaussian(2, CovarianceModel::VVV, 1.0),
            &rng,
        )
        .unwrap();
        let (a, b) = (&f.theta.triplets[0].sigma, &f.theta.triplets[1].sigma);
        assert!((a - b).amax() < 1e-12);
        assert!((a[(0, 0)] - a[(1, 1)]).abs() < 1e-12 && a[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn loglik_is_monotone_for_all_models() {
        let mut rng = SeededRng::new(12, 0);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|i| {
                let s = (i % 3) as f64 * 2.0;
                vec![s + rng.uniform(), rng.uniform() * (1.0 + s)]
            })
            .collect();
        let d = DataMatrix::from_rows(&rows).unwrap();
        for model in CovarianceModel::ALL {
            for gamma in [1.0, 3.0, f64::INFINITY] {
                let spec = MethodSpec::gaussian(3, model, gamma)
                    .with_tol(0.0)
                    .with_max_iter(60);
                let f = fit(&d, &spec, &rng).unwrap();
                for w in f.loglik_trace.windows(2) {
                    assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} {:?}", spec.id(), w);
                }
            }
        }
    }
}
