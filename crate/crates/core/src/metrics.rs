//! Agreement between two partitions: adjusted Rand index and (negated)
//! variation of information.

use crate::data::Partition;
use crate::error::{Error, Result};

/// Cross-tabulation of two partitions of the same points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub n: usize,
}

impl ContingencyTable {
    pub fn new(a: &Partition, b: &Partition) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::LengthMismatch {
                left: a.n(),
                right: b.n(),
            });
        }
        let mut counts = vec![vec![0usize; b.k()]; a.k()];
        for (&x, &y) in a.labels().iter().zip(b.labels()) {
            counts[x][y] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..b.k())
            .map(|j| counts.iter().map(|r| r[j]).sum())
            .collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: a.n(),
        })
    }
}

fn pairs(m: usize) -> f64 {
    let m = m as f64;
    m * (m - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index. Returns 1 when both partitions are
/// trivial and the index is undefined.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    let index: f64 = t.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_a: f64 = t.row_sums.iter().map(|&c| pairs(c)).sum();
    let sum_b: f64 = t.col_sums.iter().map(|&c| pairs(c)).sum();
    let total = pairs(t.n);
    let expected = if total > 0.0 {
        sum_a * sum_b / total
    } else {
        0.0
    };
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// `-VI(a, b) = -(H(a) + H(b) - 2 I(a, b))`, natural log. Accumulated per
/// cell as `p_ij (log(n_i / n_ij) + log(n_j / n_ij))`, which is exactly zero
/// for partitions that agree up to relabeling.
pub fn negative_vic(a: &Partition, b: &Partition) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    let n = t.n as f64;
    let mut vi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                let ri = t.row_sums[i] as f64;
                let cj = t.col_sums[j] as f64;
                vi += c / n * ((ri / c).ln() + (cj / c).ln());
            }
        }
    }
    Ok(0.0 - vi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(labels: &[usize]) -> Partition {
        Partition::from_ids(labels)
    }

    #[test]
    fn identical_partitions() {
        let a = part(&[0, 0, 1, 2, 2, 1]);
        let b = part(&[5, 5, 3, 0, 0, 3]);
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0);
        let v = negative_vic(&a, &b).unwrap();
        assert!(v == 0.0 && v.is_sign_positive());
    }

    #[test]
    fn one_cluster_versus_singletons() {
        let a = part(&[0, 0, 0, 0]);
        let b = part(&[0, 1, 2, 3]);
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn halves_versus_one_cluster() {
        let a = part(&[0, 0, 1, 1]);
        let b = part(&[0, 0, 0, 0]);
        assert!((negative_vic(&a, &b).unwrap() + std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn both_trivial_is_one() {
        let a = part(&[0, 0, 0]);
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            adjusted_rand_index(&part(&[0, 1]), &part(&[0])),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(negative_vic(&part(&[0, 1]), &part(&[0])).is_err());
    }
}
