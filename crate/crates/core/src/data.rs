//! Shared domain types: observations, partitions and cluster configurations.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// An `n x p` matrix of finite observations with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    labels: Option<Vec<usize>>,
    label_names: Option<Vec<String>>,
    feature_names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 || p == 0 {
            return Err(Error::EmptyData(format!("shape {n}x{p}")));
        }
        if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("non-finite value in column {j}"),
            });
        }
        Ok(Self {
            values,
            labels: None,
            label_names: None,
            feature_names: None,
        })
    }

    /// Builds a matrix from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("ragged row: expected {p} values, found {}", r.len()),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, p), flat).expect("shape checked above");
        Self::new(values)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: self.n(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_label_names(mut self, names: Vec<String>) -> Self {
        self.label_names = Some(names);
        self
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: self.p(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Ground truth as a partition, when labels are present.
    pub fn label_partition(&self) -> Option<Partition> {
        let labels = self.labels.as_ref()?;
        let k = labels.iter().max().map_or(1, |m| m + 1);
        Partition::new(labels.clone(), k).ok()
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Rows selected by `indices` (repetitions allowed). Labels follow the rows.
    pub fn select_rows(&self, indices: &[usize]) -> DataMatrix {
        let values = self.values.select(Axis(0), indices);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        DataMatrix {
            values,
            labels,
            label_names: self.label_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Column means.
    pub fn mean(&self) -> DVector<f64> {
        let m = self.values.mean_axis(Axis(0)).expect("n >= 1");
        DVector::from_iterator(self.p(), m.iter().copied())
    }

    /// Maximum-likelihood (divide by n) covariance of all rows.
    pub fn covariance_ml(&self) -> DMatrix<f64> {
        let p = self.p();
        let mean = self.mean();
        let mut s = DMatrix::zeros(p, p);
        for row in self.values.rows() {
            for a in 0..p {
                let da = row[a] - mean[a];
                for b in 0..=a {
                    s[(a, b)] += da * (row[b] - mean[b]);
                }
            }
        }
        symmetrize_lower(&mut s);
        s / self.n() as f64
    }
}

pub(crate) fn symmetrize_lower(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for a in 0..p {
        for b in 0..a {
            m[(b, a)] = m[(a, b)];
        }
    }
}

/// Reads a comma-separated file with a header row.
///
/// Every column except `label_column` must parse as a finite real. Label
/// values are mapped to class ids in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, label_column)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, label_column: Option<&str>) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_idx = match label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("label column '{name}' not found in header"),
                })?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let p = feature_names.len();

    let mut flat = Vec::new();
    let mut raw_labels = Vec::new();
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!(
                    "ragged row: expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == label_idx {
                raw_labels.push(cell.to_owned());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric value '{cell}' in column '{}'", headers[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value '{cell}' in column '{}'", headers[j]),
                });
            }
            flat.push(v);
        }
        n += 1;
    }
    if n == 0 || p == 0 {
        return Err(Error::EmptyData(format!("{n} rows, {p} numeric columns")));
    }
    let values = Array2::from_shape_vec((n, p), flat).expect("row lengths checked");
    let mut data = DataMatrix::new(values)?.with_feature_names(feature_names)?;
    if label_idx.is_some() {
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut names = Vec::new();
        let labels = raw_labels
            .into_iter()
            .map(|s| {
                *ids.entry(s.clone()).or_insert_with(|| {
                    names.push(s);
                    names.len() - 1
                })
            })
            .collect();
        data = data.with_labels(labels)?.with_label_names(names);
    }
    Ok(data)
}

/// Writes `data` as CSV with shortest round-trip float formatting. When the
/// matrix carries labels they are written to a trailing `label` column.
pub fn write_csv<W: std::io::Write>(data: &DataMatrix, writer: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Write(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = match data.feature_names() {
        Some(names) => names.to_vec(),
        None => (1..=data.p()).map(|j| format!("x{j}")).collect(),
    };
    if data.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(to_err)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = data.labels() {
            let l = labels[i];
            rec.push(match data.label_names() {
                Some(names) => names[l].clone(),
                None => l.to_string(),
            });
        }
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Write(e.to_string()))?;
    Ok(())
}

/// Result of [`standardize`].
#[derive(Debug, Clone)]
pub struct Standardized {
    pub data: DataMatrix,
    /// Columns with zero sample variance; these are centered but not scaled.
    pub zero_variance: Vec<usize>,
}

/// Centers every column and scales it to unit sample standard deviation.
pub fn standardize(data: &DataMatrix) -> Result<Standardized> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "standardize needs at least two rows".into(),
        ));
    }
    let mut values = data.values.clone();
    let mut zero_variance = Vec::new();
    for (j, mut col) in values.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let ss: f64 = col.iter().map(|v| v * v).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if sd > 0.0 {
            col.mapv_inplace(|v| v / sd);
        } else {
            zero_variance.push(j);
        }
    }
    Ok(Standardized {
        data: DataMatrix {
            values,
            ..data.clone()
        },
        zero_variance,
    })
}

/// Hard assignment of `n` points to clusters `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for k = {k}"
            )));
        }
        Ok(Self { labels, k })
    }

    /// Relabels arbitrary ids to `0..k` in order of first appearance.
    pub fn from_ids(ids: &[usize]) -> Self {
        let mut map = HashMap::new();
        let labels = ids
            .iter()
            .map(|&id| {
                let next = map.len();
                *map.entry(id).or_insert(next)
            })
            .collect();
        Self {
            labels,
            k: map.len().max(1),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Number of non-empty clusters.
    pub fn occupied(&self) -> usize {
        self.sizes().iter().filter(|&&s| s > 0).count()
    }
}

/// Size, center and scatter of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTriplet {
    pub pi: f64,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl ClusterTriplet {
    pub fn new(pi: f64, mu: DVector<f64>, sigma: DMatrix<f64>) -> Self {
        Self { pi, mu, sigma }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// A candidate clustering summarized by its triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfiguration {
    pub triplets: Vec<ClusterTriplet>,
    pub method_id: String,
}

impl ClusterConfiguration {
    pub fn new(triplets: Vec<ClusterTriplet>, method_id: impl Into<String>) -> Self {
        Self {
            triplets,
            method_id: method_id.into(),
        }
    }

    pub fn k(&self) -> usize {
        self.triplets.len()
    }

    pub fn dim(&self) -> usize {
        self.triplets.first().map_or(0, ClusterTriplet::dim)
    }
}

/// Relative eigenvalue floor used for positive-definiteness checks.
pub const PD_RELATIVE_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;
const MIXING_SUM_TOL: f64 = 1e-9;

/// Checks triplet and mixing-weight invariants for dimension `p`.
pub fn validate_configuration(theta: &ClusterConfiguration, p: usize) -> Result<()> {
    let invalid = |msg: String| Err(Error::InvalidConfiguration(msg));
    if theta.k() == 0 {
        return invalid("configuration has no clusters".into());
    }
    let mut pi_sum = 0.0;
    for (k, t) in theta.triplets.iter().enumerate() {
        if !(t.pi > 0.0 && t.pi <= 1.0) {
            return invalid(format!("cluster {k}: pi = {} outside (0, 1]", t.pi));
        }
        pi_sum += t.pi;
        if t.mu.len() != p {
            return invalid(format!(
                "cluster {k}: mu has dimension {}, expected {p}",
                t.mu.len()
            ));
        }
        if t.sigma.nrows() != p || t.sigma.ncols() != p {
            return invalid(format!(
                "cluster {k}: sigma is {}x{}, expected {p}x{p}",
                t.sigma.nrows(),
                t.sigma.ncols()
            ));
        }
        if t.mu.iter().chain(t.sigma.iter()).any(|v| !v.is_finite()) {
            return invalid(format!("cluster {k}: non-finite parameter"));
        }
        for a in 0..p {
            for b in 0..a {
                if (t.sigma[(a, b)] - t.sigma[(b, a)]).abs() > SYMMETRY_TOL {
                    return invalid(format!("cluster {k}: sigma is not symmetric"));
                }
            }
        }
        let eig = SymmetricEigen::new(t.sigma.clone()).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        if !(min > 0.0 && min > PD_RELATIVE_TOL * max) {
            return invalid(format!(
                "cluster {k}: sigma is not positive definite (smallest eigenvalue {min:e})"
            ));
        }
    }
    if (pi_sum - 1.0).abs() > MIXING_SUM_TOL {
        return invalid(format!("mixing proportions sum to {pi_sum}, not 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spherical(pi: f64, p: usize) -> ClusterTriplet {
        ClusterTriplet::new(pi, DVector::zeros(p), DMatrix::identity(p, p))
    }

    #[test]
    fn loads_minimal_csv() {
        let d = read_csv("x\n3.5\n".as_bytes(), None).unwrap();
        assert_eq!((d.n(), d.p()), (1, 1));
        assert_eq!(d.values()[[0, 0]], 3.5);
        assert!(d.labels().is_none());
    }

    #[test]
    fn non_numeric_cell_is_a_parse_error() {
        let err = read_csv("a,b\n1,abc\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn ragged_row_is_a_parse_error() {
        let err = read_csv("a,b\n1,2\n3\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_body_is_empty_data() {
        let err = read_csv("a,b\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::EmptyData(_)));
    }

    #[test]
    fn missing_value_is_rejected() {
        assert!(read_csv("a,b\n1,\n".as_bytes(), None).is_err());
        assert!(read_csv("a,b\n1,NaN\n".as_bytes(), None).is_err());
    }

    #[test]
    fn label_column_is_split_off() {
        let csv = "a,species,b\n1,x,2\n3,y,4\n5,x,6\n";
        let d = read_csv(csv.as_bytes(), Some("species")).unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert_eq!(d.labels().unwrap(), &[0, 1, 0]);
        assert_eq!(d.feature_names().unwrap(), &["a".to_string(), "b".into()]);
        assert_eq!(d.values()[[2, 1]], 6.0);
    }

    #[test]
    fn missing_label_column_is_an_error() {
        assert!(read_csv("a,b\n1,2\n".as_bytes(), Some("zzz")).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let rows = vec![
            vec![0.1, 1.0 / 3.0, -2.5e-300],
            vec![std::f64::consts::PI, 1e300, -0.0],
        ];
        let d = DataMatrix::from_rows(&rows)
            .unwrap()
            .with_labels(vec![1, 0])
            .unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), Some("label")).unwrap();
        for (a, b) in d.values().iter().zip(back.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn standardize_symmetric_column() {
        let d = DataMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let s = standardize(&d).unwrap();
        let col: Vec<f64> = s.data.values().column(0).to_vec();
        assert_eq!(col, vec![-1.0, 0.0, 1.0]);
        assert!(s.zero_variance.is_empty());
    }

    #[test]
    fn standardize_constant_column_is_flagged() {
        let d = DataMatrix::from_rows(&[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 4.0]]).unwrap();
        let s = standardize(&d).unwrap();
        assert_eq!(s.zero_variance, vec![0]);
        assert!(s.data.values().column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardize_needs_two_rows() {
        let d = DataMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(standardize(&d).is_err());
    }

    #[test]
    fn simplest_configuration_is_valid() {
        let theta = ClusterConfiguration::new(vec![spherical(1.0, 2)], "m");
        validate_configuration(&theta, 2).unwrap();
    }

    #[test]
    fn mixing_sum_violation_is_reported() {
        let theta = ClusterConfiguration::new(vec![spherical(0.7, 2), spherical(0.7, 2)], "m");
        let err = validate_configuration(&theta, 2).unwrap_err();
        assert!(err.to_string().contains("sum"), "{err}");
    }

    #[test]
    fn negative_eigenvalue_is_reported() {
        let mut t = spherical(1.0, 2);
        t.sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.1]);
        let theta = ClusterConfiguration::new(vec![t], "m");
        let err = validate_configuration(&theta, 2).unwrap_err();
        assert!(err.to_string().contains("positive definite"), "{err}");
    }

    #[test]
    fn asymmetric_sigma_and_wrong_dimension_are_reported() {
        let mut t = spherical(1.0, 2);
        t.sigma[(0, 1)] = 0.5;
        let theta = ClusterConfiguration::new(vec![t], "m");
        assert!(validate_configuration(&theta, 2).is_err());
        let theta = ClusterConfiguration::new(vec![spherical(1.0, 3)], "m");
        assert!(validate_configuration(&theta, 2).is_err());
    }

    #[test]
    fn partition_rejects_out_of_range_labels() {
        assert!(Partition::new(vec![0, 2], 2).is_err());
        let p = Partition::from_ids(&[7, 3, 7, 9]);
        assert_eq!(p.labels(), &[0, 1, 0, 2]);
        assert_eq!(p.k(), 3);
    }
}
