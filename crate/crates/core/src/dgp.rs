//! Simulated designs and Monte Carlo population score curves.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ClusterConfiguration, ClusterTriplet, DataMatrix};
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::qscore::{ScoreMode, ScoringModel};
use crate::rng::SeededRng;

/// Data generating process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Design {
    Pentagon5,
    T52D,
    T510D,
    Flower2,
    Uniform,
    DgpG { d: f64 },
    DgpU { d: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub design: Design,
    pub n: usize,
}

impl DgpSpec {
    pub fn new(design: Design, n: usize) -> Self {
        Self { design, n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument(
                "sample size must be positive".into(),
            ));
        }
        if let Design::DgpG { d } | Design::DgpU { d } = self.design {
            if d.is_nan() || d < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "separation must be >= 0, got {d}"
                )));
            }
        }
        Ok(())
    }

    /// Number of generating components.
    pub fn components(&self) -> usize {
        match self.design {
            Design::Uniform => 1,
            Design::DgpG { .. } | Design::DgpU { .. } => 2,
            _ => 5,
        }
    }
}

pub const PENTAGON5_PI: [f64; 5] = [0.2, 0.35, 0.35, 0.05, 0.05];
pub const PENTAGON5_MU: [[f64; 2]; 5] = [
    [0.0, 5.0],
    [-4.5, -0.5],
    [4.5, -0.5],
    [3.0, -2.5],
    [-3.0, -2.5],
];

pub const T52D_PI: [f64; 5] = [0.15, 0.4, 0.05, 0.15, 0.25];
pub const T52D_DF: [f64; 5] = [10.0, 12.0, 14.0, 16.0, 18.0];
pub const T52D_MU: [[f64; 2]; 5] = [
    [0.0, 3.0],
    [7.0, 1.0],
    [5.0, 9.0],
    [-11.0, 11.0],
    [-7.0, 5.0],
];
/// Covariances, row-major.
pub const T52D_SIGMA: [[f64; 4]; 5] = [
    [1.0, 0.5, 0.5, 1.0],
    [2.0, -1.5, -1.5, 2.0],
    [2.0, 1.3, 1.3, 2.0],
    [0.5, 0.0, 0.0, 0.5],
    [2.5, 0.0, 0.0, 2.5],
];
const T510D_NOISE_DIMS: usize = 8;

pub const FLOWER2_DF: f64 = 9.0;

/// Rotation by `deg` degrees, counter-clockwise for positive angles.
fn rotation(deg: f64) -> [[f64; 2]; 2] {
    let t = deg * PI / 180.0;
    [[t.cos(), -t.sin()], [t.sin(), t.cos()]]
}

fn rotate(r: &[[f64; 2]; 2], x: [f64; 2]) -> [f64; 2] {
    [
        r[0][0] * x[0] + r[0][1] * x[1],
        r[1][0] * x[0] + r[1][1] * x[1],
    ]
}

fn categorical(pi: &[f64], rng: &mut SeededRng) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (k, &p) in pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    pi.len() - 1
}

/// Student-t draw with covariance `sigma` (so scatter `sigma (df - 2) / df`).
fn student_t(mu: &DVector<f64>, chol: &DMatrix<f64>, df: f64, rng: &mut SeededRng) -> Vec<f64> {
    let p = mu.len();
    let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w: f64 = ChiSquared::new(df).expect("positive df").sample(rng);
    let scale = ((df - 2.0) / w).sqrt();
    (mu + chol * z * scale).iter().copied().collect()
}

fn chol_of(rows: usize, entries: &[f64]) -> DMatrix<f64> {
    nalgebra::Cholesky::new(DMatrix::from_row_slice(rows, rows, entries))
        .expect("positive-definite design covariance")
        .l()
}

/// T52D covariance of component `k`, padded with an identity block for
/// `extra` further coordinates.
fn t5_sigma(k: usize, extra: usize) -> DMatrix<f64> {
    let p = 2 + extra;
    let mut s = DMatrix::identity(p, p);
    let src = &T52D_SIGMA[k];
    s[(0, 0)] = src[0];
    s[(0, 1)] = src[1];
    s[(1, 0)] = src[2];
    s[(1, 1)] = src[3];
    s
}

fn t5_mu(k: usize, extra: usize) -> DVector<f64> {
    let mut m = DVector::zeros(2 + extra);
    m[0] = T52D_MU[k][0];
    m[1] = T52D_MU[k][1];
    m
}

/// Draws `spec.n` points with labels set to the generating component.
pub fn sample(spec: &DgpSpec, rng: &SeededRng) -> Result<DataMatrix> {
    spec.validate()?;
    let mut rng = rng.clone();
    let n = spec.n;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let normal = |rng: &mut SeededRng| -> f64 { rng.sample(StandardNormal) };
    match spec.design {
        Design::Pentagon5 => {
            for _ in 0..n {
                let k = categorical(&PENTAGON5_PI, &mut rng);
                let m = PENTAGON5_MU[k];
                rows.push(vec![m[0] + normal(&mut rng), m[1] + normal(&mut rng)]);
                labels.push(k);
            }
        }
        Design::T52D | Design::T510D => {
            let extra = if spec.design == Design::T510D {
                T510D_NOISE_DIMS
            } else {
                0
            };
            let mus: Vec<DVector<f64>> = (0..5).map(|k| t5_mu(k, extra)).collect();
            let chols: Vec<DMatrix<f64>> = (0..5)
                .map(|k| {
                    nalgebra::Cholesky::new(t5_sigma(k, extra))
                        .expect("SPD")
                        .l()
                })
                .collect();
            for _ in 0..n {
                let k = categorical(&T52D_PI, &mut rng);
                rows.push(student_t(&mus[k], &chols[k], T52D_DF[k], &mut rng));
                labels.push(k);
            }
        }
        Design::Flower2 => {
            let cw45 = rotation(-45.0);
            let ccw45 = rotation(45.0);
            let t_mu = DVector::from_column_slice(&[0.0, 5.0]);
            let t_sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 10.0]);
            let rot = |deg: f64| {
                let r = rotation(deg);
                DMatrix::from_row_slice(2, 2, &[r[0][0], r[0][1], r[1][0], r[1][1]])
            };
            let chol_t = |deg: f64| {
                let r = rot(deg);
                let s = &r * &t_sigma * r.transpose();
                chol_of(2, &[s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]])
            };
            let chol3 = chol_t(-135.0);
            let chol4 = chol_t(135.0);
            for _ in 0..n {
                let k = categorical(&[0.2; 5], &mut rng);
                let x = match k {
                    0 | 1 => {
                        let base = [2.0 * rng.uniform() - 1.0, 1.0 + 9.0 * rng.uniform()];
                        let r = if k == 0 { &cw45 } else { &ccw45 };
                        rotate(r, base).to_vec()
                    }
                    2 => student_t(&t_mu, &chol3, FLOWER2_DF, &mut rng),
                    3 => student_t(&t_mu, &chol4, FLOWER2_DF, &mut rng),
                    _ => vec![normal(&mut rng), normal(&mut rng)],
                };
                rows.push(x);
                labels.push(k);
            }
        }
        Design::Uniform => {
            for _ in 0..n {
                rows.push(vec![rng.uniform(), rng.uniform()]);
                labels.push(0);
            }
        }
        Design::DgpG { d } => {
            for _ in 0..n {
                let k = categorical(&[0.5, 0.5], &mut rng);
                rows.push(vec![k as f64 * d + normal(&mut rng), normal(&mut rng)]);
                labels.push(k);
            }
        }
        Design::DgpU { d } => {
            for _ in 0..n {
                let k = categorical(&[0.5, 0.5], &mut rng);
                rows.push(vec![
                    k as f64 * d + 2.0 * rng.uniform() - 1.0,
                    2.0 * rng.uniform() - 1.0,
                ]);
                labels.push(k);
            }
        }
    }
    DataMatrix::from_rows(&rows)?.with_labels(labels)
}

/// Designs of the two-cluster separation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeparationDesign {
    /// Two unit-covariance Gaussians at `(0, 0)` and `(d, 0)`.
    Gaussian,
    /// Two uniforms on `[-1, 1]^2` and `[d - 1, d + 1] x [-1, 1]`.
    Uniform,
}

impl SeparationDesign {
    pub fn with_separation(self, d: f64) -> Design {
        match self {
            SeparationDesign::Gaussian => Design::DgpG { d },
            SeparationDesign::Uniform => Design::DgpU { d },
        }
    }

    /// Per-coordinate variance of one component.
    fn component_variance(self) -> f64 {
        match self {
            SeparationDesign::Gaussian => 1.0,
            SeparationDesign::Uniform => 1.0 / 3.0,
        }
    }
}

/// One-cluster configuration at the mixture mean and covariance, and the
/// two-cluster configuration at the component centers with the common
/// component covariance.
pub fn reference_configurations(
    design: SeparationDesign,
    d: f64,
) -> Result<(ClusterConfiguration, ClusterConfiguration)> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "separation must be >= 0, got {d}"
        )));
    }
    let v = design.component_variance();
    let one = ClusterConfiguration::new(
        vec![ClusterTriplet::new(
            1.0,
            DVector::from_column_slice(&[d / 2.0, 0.0]),
            DMatrix::from_diagonal(&DVector::from_column_slice(&[v + d * d / 4.0, v])),
        )],
        "K1",
    );
    let sigma = DMatrix::from_diagonal_element(2, 2, v);
    let two = ClusterConfiguration::new(
        vec![
            ClusterTriplet::new(0.5, DVector::from_column_slice(&[0.0, 0.0]), sigma.clone()),
            ClusterTriplet::new(0.5, DVector::from_column_slice(&[d, 0.0]), sigma),
        ],
        "K2",
    );
    Ok((one, two))
}

/// Monte Carlo estimates of the population hard and smooth scores of the
/// one- and two-cluster reference configurations over a grid of separations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationScoreResult {
    pub d_grid: Vec<f64>,
    pub h_k1: Vec<f64>,
    pub h_k2: Vec<f64>,
    pub t_k1: Vec<f64>,
    pub t_k2: Vec<f64>,
    pub se_h_k1: Vec<f64>,
    pub se_h_k2: Vec<f64>,
    pub se_t_k1: Vec<f64>,
    pub se_t_k2: Vec<f64>,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let r = v.len() as f64;
    let m = v.iter().sum::<f64>() / r;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (r - 1.0);
    (m, (var / r).sqrt())
}

/// Smallest Monte Carlo sample per repeat accepted by [`population_score_curve`].
pub const MIN_DRAWS: usize = 1000;

/// Estimates the population scores at every separation in `d_grid`, each
/// as the mean over `repeats` independent averages of `draws` points.
///
/// Repeat `r` uses the same underlying random numbers at every grid point,
/// so the curves are smooth in `d` and their differences have low noise.
pub fn population_score_curve(
    design: SeparationDesign,
    d_grid: &[f64],
    draws: usize,
    repeats: usize,
    rng: &SeededRng,
) -> Result<PopulationScoreResult> {
    if draws < MIN_DRAWS || repeats < 2 {
        return Err(Error::InvalidArgument(format!(
            "need draws >= {MIN_DRAWS} and repeats >= 2"
        )));
    }
    if d_grid.is_empty() {
        return Err(Error::InvalidArgument("empty separation grid".into()));
    }
    let per_point = map_indexed(d_grid.len() * repeats, |j| -> Result<[f64; 4]> {
        let (gi, r) = (j / repeats, j % repeats);
        let d = d_grid[gi];
        let (one, two) = reference_configurations(design, d)?;
        let spec = DgpSpec::new(design.with_separation(d), draws);
        let data = sample(&spec, &rng.derive(&[r as u64]))?;
        let m1 = ScoringModel::new(&one)?;
        let m2 = ScoringModel::new(&two)?;
        Ok([
            m1.mean_score(&data, ScoreMode::Hard),
            m2.mean_score(&data, ScoreMode::Hard),
            m1.mean_score(&data, ScoreMode::Smooth),
            m2.mean_score(&data, ScoreMode::Smooth),
        ])
    });
    let per_point = per_point.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = PopulationScoreResult {
        d_grid: d_grid.to_vec(),
        h_k1: vec![],
        h_k2: vec![],
        t_k1: vec![],
        t_k2: vec![],
        se_h_k1: vec![],
        se_h_k2: vec![],
        se_t_k1: vec![],
        se_t_k2: vec![],
    };
    for chunk in per_point.chunks(repeats) {
        let col = |c: usize| mean_se(&chunk.iter().map(|v| v[c]).collect::<Vec<_>>());
        let stats = [col(0), col(1), col(2), col(3)];
        out.h_k1.push(stats[0].0);
        out.h_k2.push(stats[1].0);
        out.t_k1.push(stats[2].0);
        out.t_k2.push(stats[3].0);
        out.se_h_k1.push(stats[0].1);
        out.se_h_k2.push(stats[1].1);
        out.se_t_k1.push(stats[2].1);
        out.se_t_k2.push(stats[3].1);
    }
    Ok(out)
}

/// Evenly spaced grid from `start` to `stop` inclusive.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if start.is_nan() || stop.is_nan() || step.is_nan() || start > stop || step <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "invalid grid {start}..{stop} by {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

/// First separation where `b - a` changes sign, by linear interpolation
/// between adjacent grid points.
pub fn crossing(d: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    for i in 1..diff.len() {
        let (l, r) = (diff[i - 1], diff[i]);
        if l == 0.0 {
            return Some(d[i - 1]);
        }
        if (l < 0.0) != (r < 0.0) || r == 0.0 {
            return Some(d[i - 1] + (d[i] - d[i - 1]) * l / (l - r));
        }
    }
    None
}

impl PopulationScoreResult {
    pub fn hard_crossing(&self) -> Option<f64> {
        crossing(&self.d_grid, &self.h_k1, &self.h_k2)
    }

    pub fn smooth_crossing(&self) -> Option<f64> {
        crossing(&self.d_grid, &self.t_k1, &self.t_k2)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Write(e.to_string());
        w.write_record([
            "d", "h_k1", "h_k2", "t_k1", "t_k2", "se_h_k1", "se_h_k2", "se_t_k1", "se_t_k2",
        ])
        .map_err(io)?;
        for i in 0..self.d_grid.len() {
            let rec = [
                self.d_grid[i],
                self.h_k1[i],
                self.h_k2[i],
                self.t_k1[i],
                self.t_k2[i],
                self.se_h_k1[i],
                self.se_h_k2[i],
                self.se_t_k1[i],
                self.se_t_k2[i],
            ];
            w.write_record(rec.iter().map(|v| format!("{v}")))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Write(e.to_string()))?;
        Ok(())
    }
}

/// Label-conditional sample mean and ML covariance.
pub fn component_moments(data: &DataMatrix, label: usize) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let idx: Vec<usize> = data
        .labels()?
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == label)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return None;
    }
    let sub = data.select_rows(&idx);
    Some((sub.mean(), sub.covariance_ml()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_configurations_closed_form() {
        let (one, two) = reference_configurations(SeparationDesign::Gaussian, 0.0).unwrap();
        assert_eq!(one.triplets[0].mu.as_slice(), &[0.0, 0.0]);
        assert_eq!(one.triplets[0].sigma, DMatrix::identity(2, 2));
        assert_eq!(two.k(), 2);
        let (one, _) = reference_configurations(SeparationDesign::Gaussian, 4.0).unwrap();
        assert_eq!(one.triplets[0].sigma[(0, 0)], 5.0);
        let (_, two) = reference_configurations(SeparationDesign::Uniform, 2.0).unwrap();
        assert_eq!(
            two.triplets[1].sigma,
            DMatrix::from_diagonal_element(2, 2, 1.0 / 3.0)
        );
        assert_eq!(two.triplets[1].mu.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn crossing_by_interpolation() {
        let d = [0.0, 1.0, 2.0];
        assert_eq!(
            crossing(&d, &[0.0, 0.0, 0.0], &[-2.0, -1.0, 1.0]),
            Some(1.5)
        );
        assert_eq!(crossing(&d, &[0.0; 3], &[-1.0; 3]), None);
    }

    #[test]
    fn grid_is_inclusive() {
        let g = grid(2.5, 4.0, 0.01).unwrap();
        assert_eq!(g.len(), 151);
        assert!((g[150] - 4.0).abs() < 1e-12);
        assert!(grid(4.0, 2.5, 0.1).is_err());
    }

    #[test]
    fn samples_are_reproducible_and_labeled() {
        for design in [
            Design::Pentagon5,
            Design::T52D,
            Design::T510D,
            Design::Flower2,
            Design::Uniform,
            Design::DgpU { d: 3.0 },
        ] {
            let spec = DgpSpec::new(design, 50);
            let a = sample(&spec, &SeededRng::new(1, 2)).unwrap();
            let b = sample(&spec, &SeededRng::new(1, 2)).unwrap();
            assert_eq!(a.values(), b.values());
            assert_eq!(a.labels().unwrap().len(), 50);
        }
        let t = sample(&DgpSpec::new(Design::T510D, 5), &SeededRng::new(0, 0)).unwrap();
        assert_eq!(t.p(), 10);
    }

    #[test]
    fn uniform_square_bounds() {
        let d = sample(&DgpSpec::new(Design::Uniform, 1000), &SeededRng::new(3, 0)).unwrap();
        assert!(d.values().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn separated_uniform_supports() {
        let d = sample(
            &DgpSpec::new(Design::DgpU { d: 5.0 }, 500),
            &SeededRng::new(3, 0),
        )
        .unwrap();
        for (i, &l) in d.labels().unwrap().iter().enumerate() {
            let x = d.row(i);
            assert!((x[0] - 5.0 * l as f64).abs() <= 1.0 && x[1].abs() <= 1.0);
        }
    }
}
