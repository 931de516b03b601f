use proptest::prelude::*;
use quadscore::data::Partition;
use quadscore::metrics::{adjusted_rand_index, negative_vic};

fn partition(labels: Vec<usize>) -> Partition {
    Partition::from_ids(&labels)
}

/// Pair-counting ARI over all `C(n, 2)` pairs.
fn ari_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut total) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            both += (sa && sb) as u8 as f64;
            only_a += sa as u8 as f64;
            only_b += sb as u8 as f64;
            total += 1.0;
        }
    }
    let expected = only_a * only_b / total;
    let max = 0.5 * (only_a + only_b);
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// `2 H(a, b) - H(a) - H(b)` from the joint histogram.
fn vi_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint = std::collections::BTreeMap::new();
    let mut ma = std::collections::BTreeMap::new();
    let mut mb = std::collections::BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0.0) += 1.0;
        *ma.entry(x).or_insert(0.0) += 1.0;
        *mb.entry(y).or_insert(0.0) += 1.0;
    }
    let h = |m: Vec<f64>| -> f64 { m.into_iter().map(|c| -(c / n) * (c / n).ln()).sum() };
    2.0 * h(joint.into_values().collect())
        - h(ma.into_values().collect())
        - h(mb.into_values().collect())
}

fn labels_strategy(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..5, n)
}

fn pair_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2usize..=12).prop_flat_map(|n| (labels_strategy(n), labels_strategy(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ari_matches_pair_counting((a, b) in pair_strategy()) {
        let got = adjusted_rand_index(&partition(a.clone()), &partition(b.clone())).unwrap();
        prop_assert!((got - ari_oracle(&a, &b)).abs() <= 1e-12);
    }

    #[test]
    fn vi_matches_joint_entropy((a, b) in pair_strategy()) {
        let got = negative_vic(&partition(a.clone()), &partition(b.clone())).unwrap();
        prop_assert!((got + vi_oracle(&a, &b)).abs() <= 1e-12);
    }

    #[test]
    fn metrics_are_symmetric_and_relabeling_invariant((a, b) in pair_strategy(), perm in Just([3usize, 0, 4, 1, 2])) {
        let (pa, pb) = (partition(a.clone()), partition(b.clone()));
        let relabeled = partition(a.iter().map(|&l| perm[l]).collect());
        let ari = adjusted_rand_index(&pa, &pb).unwrap();
        let vi = negative_vic(&pa, &pb).unwrap();
        prop_assert_eq!(ari, adjusted_rand_index(&pb, &pa).unwrap());
        prop_assert!((vi - negative_vic(&pb, &pa).unwrap()).abs() <= 1e-14);
        prop_assert!((ari - adjusted_rand_index(&relabeled, &pb).unwrap()).abs() <= 1e-12);
        prop_assert!((vi - negative_vic(&relabeled, &pb).unwrap()).abs() <= 1e-12);
        prop_assert!(vi <= 0.0);
    }

    #[test]
    fn identical_up_to_relabeling_is_perfect(a in (2usize..=12).prop_flat_map(labels_strategy)) {
        let pa = partition(a.clone());
        let relabeled = partition(a.iter().map(|&l| 4 - l).collect());
        prop_assert_eq!(adjusted_rand_index(&pa, &relabeled).unwrap(), 1.0);
        prop_assert_eq!(negative_vic(&pa, &relabeled).unwrap(), 0.0);
    }

    #[test]
    fn vi_triangle_inequality(
        (a, b, c) in (2usize..=12).prop_flat_map(|n| (labels_strategy(n), labels_strategy(n), labels_strategy(n)))
    ) {
        let (pa, pb, pc) = (partition(a), partition(b), partition(c));
        let ab = -negative_vic(&pa, &pb).unwrap();
        let bc = -negative_vic(&pb, &pc).unwrap();
        let ac = -negative_vic(&pa, &pc).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }
}

#[test]
fn distinct_partitions_have_negative_vi() {
    let a = partition(vec![0, 0, 1, 1]);
    let b = partition(vec![0, 1, 0, 1]);
    assert!(negative_vic(&a, &b).unwrap() < 0.0);
    assert!(adjusted_rand_index(&a, &b).unwrap() < 1.0);
}
