use nalgebra::DMatrix;
use quadscore::dgp::{
    component_moments, population_score_curve, reference_configurations, sample, Design, DgpSpec,
    SeparationDesign, PENTAGON5_MU, PENTAGON5_PI, T52D_MU, T52D_PI, T52D_SIGMA,
};
use quadscore::{DataMatrix, SeededRng};

const N: usize = 100_000;

fn draw(design: Design, seed: u64) -> DataMatrix {
    sample(&DgpSpec::new(design, N), &SeededRng::new(seed, 0)).unwrap()
}

/// Asserts `|mean - target| <= 3 se` for each coordinate of the points
/// with the given label, and returns those points.
fn check_mean(data: &DataMatrix, label: usize, target: &[f64]) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = (0..data.n())
        .filter(|&i| data.labels().unwrap()[i] == label)
        .map(|i| data.row(i).to_vec())
        .collect();
    let m = rows.len() as f64;
    for (j, &t) in target.iter().enumerate() {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let se = (var / m).sqrt();
        assert!(
            (mean - t).abs() <= 3.0 * se,
            "label {label} coord {j}: {mean} vs {t} (se {se})"
        );
    }
    rows
}

/// Asserts each covariance entry is within 3 se of `target`.
fn check_cov(rows: &[Vec<f64>], mu: &[f64], target: &DMatrix<f64>) {
    let m = rows.len() as f64;
    let p = mu.len();
    for a in 0..p {
        for b in 0..p {
            let prods: Vec<f64> = rows
                .iter()
                .map(|r| (r[a] - mu[a]) * (r[b] - mu[b]))
                .collect();
            let mean = prods.iter().sum::<f64>() / m;
            let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let se = (var / m).sqrt();
            assert!(
                (mean - target[(a, b)]).abs() <= 3.0 * se,
                "cov[{a},{b}] {mean} vs {} (se {se})",
                target[(a, b)]
            );
        }
    }
}

fn check_frequency(data: &DataMatrix, label: usize, pi: f64) {
    let count = data
        .labels()
        .unwrap()
        .iter()
        .filter(|&&l| l == label)
        .count() as f64;
    let se = (pi * (1.0 - pi) / N as f64).sqrt();
    assert!(
        (count / N as f64 - pi).abs() <= 3.0 * se,
        "label {label}: {} vs {pi}",
        count / N as f64
    );
}

#[test]
fn uniform_square_moments() {
    let d = draw(Design::Uniform, 1);
    let rows = check_mean(&d, 0, &[0.5, 0.5]);
    check_cov(
        &rows,
        &[0.5, 0.5],
        &DMatrix::from_diagonal_element(2, 2, 1.0 / 12.0),
    );
}

#[test]
fn pentagon_moments() {
    let d = draw(Design::Pentagon5, 2);
    for k in 0..5 {
        check_frequency(&d, k, PENTAGON5_PI[k]);
        let rows = check_mean(&d, k, &PENTAGON5_MU[k]);
        check_cov(&rows, &PENTAGON5_MU[k], &DMatrix::identity(2, 2));
    }
}

#[test]
fn t5_moments() {
    let d = draw(Design::T52D, 3);
    for k in 0..5 {
        check_frequency(&d, k, T52D_PI[k]);
        let rows = check_mean(&d, k, &T52D_MU[k]);
        check_cov(
            &rows,
            &T52D_MU[k],
            &DMatrix::from_row_slice(2, 2, &T52D_SIGMA[k]),
        );
    }
}

#[test]
fn t510d_pads_with_unit_noise() {
    let d = draw(Design::T510D, 4);
    assert_eq!(d.p(), 10);
    for k in [0, 1, 4] {
        let mut mu = vec![0.0; 10];
        mu[..2].copy_from_slice(&T52D_MU[k]);
        let rows = check_mean(&d, k, &mu);
        let mut sigma = DMatrix::identity(10, 10);
        sigma
            .view_mut((0, 0), (2, 2))
            .copy_from(&DMatrix::from_row_slice(2, 2, &T52D_SIGMA[k]));
        check_cov(&rows, &mu, &sigma);
    }
}

#[test]
fn flower_component_centers() {
    let d = draw(Design::Flower2, 5);
    let c = 5.5 / 2f64.sqrt();
    let centers = [[c, c], [-c, c], [0.0, 5.0], [0.0, 5.0], [0.0, 0.0]];
    for (k, center) in centers.iter().enumerate() {
        check_frequency(&d, k, 0.2);
        check_mean(&d, k, center);
    }
    let rows = check_mean(&d, 4, &[0.0, 0.0]);
    check_cov(&rows, &[0.0, 0.0], &DMatrix::identity(2, 2));
    // t components: covariance diag(1, 10) rotated by 135 degrees either way
    let (cs, sn) = ((135f64).to_radians().cos(), (135f64).to_radians().sin());
    for (k, sign) in [(2, -1.0), (3, 1.0)] {
        let r = DMatrix::from_row_slice(2, 2, &[cs, -sign * sn, sign * sn, cs]);
        let target = &r
            * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 10.0]))
            * r.transpose();
        let (_, cov) = component_moments(&d, k).unwrap();
        assert!((cov - &target).amax() < 0.25, "component {k}");
    }
}

#[test]
fn separated_designs_match_reference_moments() {
    for (design, sep) in [
        (SeparationDesign::Gaussian, 4.0),
        (SeparationDesign::Uniform, 3.0),
    ] {
        let d = sample(
            &DgpSpec::new(design.with_separation(sep), 1_000_000),
            &SeededRng::new(6, 0),
        )
        .unwrap();
        let (one, two) = reference_configurations(design, sep).unwrap();
        let t = &one.triplets[0];
        let all: Vec<Vec<f64>> = (0..d.n()).map(|i| d.row(i).to_vec()).collect();
        check_cov(&all, t.mu.as_slice(), &t.sigma);
        for (k, tk) in two.triplets.iter().enumerate() {
            let rows = check_mean(&d, k, tk.mu.as_slice());
            check_cov(&rows, tk.mu.as_slice(), &tk.sigma);
        }
    }
}

#[test]
fn samples_are_reproducible() {
    let spec = DgpSpec::new(Design::Flower2, 500);
    assert_eq!(
        sample(&spec, &SeededRng::new(9, 1)).unwrap(),
        sample(&spec, &SeededRng::new(9, 1)).unwrap()
    );
    assert_ne!(
        sample(&spec, &SeededRng::new(9, 1)).unwrap(),
        sample(&spec, &SeededRng::new(9, 2)).unwrap()
    );
}

#[test]
fn one_cluster_hard_and_smooth_scores_coincide() {
    let r = population_score_curve(
        SeparationDesign::Gaussian,
        &[0.0, 2.0, 4.0],
        2000,
        3,
        &SeededRng::new(1, 0),
    )
    .unwrap();
    for i in 0..3 {
        assert!((r.h_k1[i] - r.t_k1[i]).abs() <= r.se_h_k1[i].max(1e-12));
        assert!(r.t_k2[i] <= r.h_k2[i]);
    }
    assert!(population_score_curve(
        SeparationDesign::Gaussian,
        &[1.0],
        999,
        3,
        &SeededRng::new(1, 0)
    )
    .is_err());
}
