use proptest::prelude::*;
use quadscore::data::{read_csv, write_csv};
use quadscore::{DataMatrix, SeededRng};

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(rows in (1usize..5).prop_flat_map(|p| prop::collection::vec(prop::collection::vec(finite(), p), 1..20))) {
        let data = DataMatrix::from_rows(&rows).unwrap();
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), None).unwrap();
        for (a, b) in data.values().iter().zip(back.values().iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn labeled_round_trip(labels in prop::collection::vec(0usize..4, 1..30)) {
        let rows: Vec<Vec<f64>> = labels.iter().map(|&l| vec![l as f64 / 3.0, -0.1]).collect();
        let data = DataMatrix::from_rows(&rows).unwrap().with_labels(labels).unwrap();
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), Some("label")).unwrap();
        prop_assert_eq!(back.values(), data.values());
        prop_assert_eq!(back.label_partition().unwrap().k(), data.label_partition().unwrap().occupied());
    }

    #[test]
    fn rng_streams_are_reproducible(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = SeededRng::new(seed, stream);
        let mut b = SeededRng::new(seed, stream);
        for _ in 0..10_000 {
            prop_assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
        let mut c = SeededRng::new(seed, stream.wrapping_add(1));
        let mut a = SeededRng::new(seed, stream);
        let same = (0..16).filter(|_| a.uniform() == c.uniform()).count();
        prop_assert!(same < 16);
    }
}
