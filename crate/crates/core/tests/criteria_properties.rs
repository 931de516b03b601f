mod common;

use common::{normal, random_data};
use proptest::prelude::*;
use quadscore::criteria::{
    aic_bic, average_silhouette_width, calinski_harabasz, co_assignment_distance, icl,
    icl_entropy_form,
};
use quadscore::data::Partition;
use quadscore::qscore::{assignment_entropy, posterior_weights};
use quadscore::{fit, CovarianceModel, DataMatrix, MethodSpec, SeededRng};

fn permuted(z: &Partition, shift: usize) -> Partition {
    let k = z.k();
    Partition::new(z.labels().iter().map(|&l| (l + shift) % k).collect(), k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn ch_and_asw_ignore_cluster_names(seed in any::<u64>(), k in 2usize..5, shift in 1usize..4) {
        let mut rng = SeededRng::new(seed, 0);
        let data = random_data(30, 2, &mut rng);
        let z = Partition::new((0..30).map(|i| if i < k { i } else { rng.below(k) }).collect(), k).unwrap();
        let other = permuted(&z, shift);
        let (a, b) = (calinski_harabasz(&data, &z).unwrap(), calinski_harabasz(&data, &other).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.abs());
        let (a, b) = (average_silhouette_width(&data, &z).unwrap(), average_silhouette_width(&data, &other).unwrap());
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn co_assignment_distance_ignores_cluster_names(seed in any::<u64>(), k in 2usize..5, shift in 1usize..4) {
        let mut rng = SeededRng::new(seed, 1);
        let a = common::random_partition(25, k, &mut rng);
        let b = common::random_partition(25, k, &mut rng);
        let d = co_assignment_distance(&a, &b);
        prop_assert_eq!(d, co_assignment_distance(&permuted(&a, shift), &b));
        prop_assert_eq!(d, co_assignment_distance(&a, &permuted(&b, shift)));
        prop_assert_eq!(co_assignment_distance(&a, &permuted(&a, shift)), 0.0);
    }
}

fn mixture(n: usize, sep: f64, rng: &mut SeededRng) -> DataMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let c = if i % 3 == 0 { sep } else { 0.0 };
            vec![c + normal(rng), normal(rng)]
        })
        .collect();
    DataMatrix::from_rows(&rows).unwrap()
}

#[test]
fn icl_never_exceeds_bic() {
    let mut rng = SeededRng::new(5, 0);
    for run in 0..60u64 {
        let sep = 1.0 + 10.0 * rng.uniform();
        let data = mixture(90, sep, &mut rng);
        let model = CovarianceModel::ALL[rng.below(6)];
        let spec = MethodSpec::gaussian(1 + rng.below(4), model, 100.0);
        let Ok(f) = fit(&data, &spec, &rng.derive(&[run])) else {
            continue;
        };
        let (_, bic) = aic_bic(&f, data.n()).unwrap();
        let v = icl(&f, &data).unwrap();
        assert!(
            v <= bic + 1e-9 * bic.abs(),
            "{} icl {v} bic {bic}",
            spec.id()
        );
        let alt = icl_entropy_form(&f, &data).unwrap();
        assert!(
            (alt - v).abs() <= 1e-8 * v.abs(),
            "entropy form {alt} vs {v}"
        );
        let ent = assignment_entropy(&posterior_weights(&data, &f.theta).unwrap());
        if ent < 1e-8 {
            assert!((bic - v).abs() <= 1e-6, "{bic} {v}");
        }
    }
}

#[test]
fn icl_equals_bic_for_one_component() {
    let mut rng = SeededRng::new(6, 0);
    let data = mixture(50, 0.0, &mut rng);
    let f = fit(
        &data,
        &MethodSpec::gaussian(1, CovarianceModel::VVV, f64::INFINITY),
        &rng,
    )
    .unwrap();
    let (_, bic) = aic_bic(&f, 50).unwrap();
    assert!((icl(&f, &data).unwrap() - bic).abs() <= 1e-6);
}
