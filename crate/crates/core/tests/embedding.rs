use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use texture_space::grouping::DissimilarityMatrix;
use texture_space::mds::*;
use texture_space::space::*;

fn gaussian_rows(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
}

/// Centered points with identity covariance.
fn whitened(n: usize, k: usize, seed: u64) -> Configuration {
    let mut c = Configuration::from_rows(&gaussian_rows(n, k, seed));
    c.center();
    let m = c.to_matrix();
    let eig = SymmetricEigen::new(m.transpose() * &m / n as f64);
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    Configuration::from_matrix(&(m * inv_sqrt))
}

fn rotation(seed: u64) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(3, 3, &gaussian_rows(3, 3, seed).concat());
    a.qr().q()
}

fn transform(c: &Configuration, t: &DMatrix<f64>, shift: f64) -> Configuration {
    let mut out = Configuration::from_matrix(&(c.to_matrix() * t));
    out.data.iter_mut().for_each(|v| *v += shift);
    out
}

fn euclidean(c: &Configuration, f: impl Fn(f64) -> f64) -> DissimilarityMatrix {
    DissimilarityMatrix::from_fn((1..=c.n as u32).collect(), |i, j| f(c.distance(i, j))).unwrap()
}

fn options() -> MdsOptions {
    MdsOptions { restarts: 6, seed: 3, ..MdsOptions::default() }
}

#[test]
fn stress_matches_direct_formula() {
    let c = Configuration::from_rows(&gaussian_rows(6, 2, 8));
    let diss = DissimilarityMatrix::from_fn((1..=6).collect(), |i, j| ((i * 5 + j * 3) % 4) as f64 + 1.0).unwrap();
    // direct evaluation: distances, disparities from the library's monotone fit
    let mut d = vec![];
    for i in 0..6 {
        for j in i + 1..6 {
            let dx = c.get(i, 0) - c.get(j, 0);
            let dy = c.get(i, 1) - c.get(j, 1);
            d.push((dx * dx + dy * dy).sqrt());
        }
    }
    let hat = isotonic_fit(&diss.upper_triangle(), &d);
    let num: f64 = d.iter().zip(&hat).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = d.iter().map(|a| a * a).sum();
    let direct = (num / den).sqrt();
    assert!((kruskal_stress(&diss, &c).unwrap() - direct).abs() < 1e-12);
    assert!((stress1(&d, &hat).unwrap() - direct).abs() < 1e-12);
}

#[test]
fn planted_configuration_is_recovered() {
    let truth = Configuration::from_rows(&gaussian_rows(24, 3, 21));
    for (name, f) in [("identity", (|d: f64| d) as fn(f64) -> f64), ("square", |d: f64| d * d), ("exp", |d: f64| d.exp())] {
        let sol = nonmetric_mds(&euclidean(&truth, f), 3, &options()).unwrap();
        assert!(sol.stress < 0.01, "{name}: stress {}", sol.stress);
        let fit = procrustes_align(&truth, &sol.coordinates).unwrap();
        assert!(fit.residual < 1e-2, "{name}: residual {}", fit.residual);
    }
}

#[test]
fn monotone_transforms_barely_change_stress() {
    let truth = Configuration::from_rows(&gaussian_rows(16, 3, 5));
    let base = nonmetric_mds(&euclidean(&truth, |d| d), 2, &options()).unwrap();
    let log = nonmetric_mds(&euclidean(&truth, |d| (1.0 + d).ln()), 2, &options()).unwrap();
    assert!((base.stress - log.stress).abs() < 1e-3, "{} vs {}", base.stress, log.stress);
}

#[test]
fn stress_is_reproducible_from_coordinates() {
    let diss = DissimilarityMatrix::from_fn((1..=14).collect(), |i, j| ((i * 7 + j * 11) % 9) as f64).unwrap();
    let sol = nonmetric_mds(&diss, 2, &options()).unwrap();
    assert!((kruskal_stress(&diss, &sol.coordinates).unwrap() - sol.stress).abs() < 1e-9);
    for d in 0..2 {
        assert!(sol.coordinates.column(d).iter().sum::<f64>().abs() < 1e-9);
    }
    assert_eq!(sol, nonmetric_mds(&diss, 2, &options()).unwrap());
}

#[test]
fn rigid_motions_leave_stress_unchanged() {
    let diss = DissimilarityMatrix::from_fn((1..=10).collect(), |i, j| ((i + 2 * j) % 5) as f64 + 0.5).unwrap();
    let sol = nonmetric_mds(&diss, 3, &options()).unwrap();
    for seed in 0..5 {
        let mut t = rotation(seed);
        if seed % 2 == 1 {
            t.column_mut(0).neg_mut();
        }
        let moved = transform(&sol.coordinates, &t, 3.5);
        let s = kruskal_stress(&diss, &moved).unwrap();
        assert!((s - sol.stress).abs() < 1e-12, "{s} vs {}", sol.stress);
    }
}

#[test]
fn full_dimensionality_is_no_worse_than_three() {
    let diss = DissimilarityMatrix::from_fn((1..=8).collect(), |i, j| ((i * 3 + j * 5) % 7) as f64 + 1.0).unwrap();
    let sols = scree(&diss, 7, &options()).unwrap();
    assert!(sols[6].stress <= sols[2].stress + 1e-12);
}

#[test]
fn planted_three_dimensional_scree() {
    let truth = Configuration::from_rows(&gaussian_rows(20, 3, 13));
    let points = scree_points(&scree(&euclidean(&truth, |d| d), 5, &options()).unwrap());
    assert!(points[0].stress > 0.15, "{points:?}");
    assert!(points[2..].iter().all(|p| p.stress < 0.01), "{points:?}");
    assert!(points.windows(2).all(|w| w[1].stress <= w[0].stress + 1e-12));
    assert!(points.iter().all(|p| p.meets_cutoff == (p.stress <= STRESS_CUTOFF)));
    assert_eq!(elbow(&points), Some(if points[1].meets_cutoff { 2 } else { 3 }));
}

#[test]
fn procrustes_matches_polar_decomposition() {
    let a = Configuration::from_rows(&gaussian_rows(15, 3, 2));
    let noise = gaussian_rows(15, 3, 99);
    let moved = transform(&a, &rotation(4), 1.0);
    let b = Configuration::from_rows(
        &(0..15).map(|i| (0..3).map(|d| moved.get(i, d) + 0.01 * noise[i][d]).collect()).collect::<Vec<Vec<f64>>>(),
    );
    let fit = procrustes_align(&a, &b).unwrap();

    // independent route: residual = 1 - (trace sqrt(M^T M))^2 for unit-norm centered inputs
    let unit = |c: &Configuration| {
        let mut c = c.clone();
        c.center();
        let m = c.to_matrix();
        let n = m.norm();
        m / n
    };
    let m = unit(&b).transpose() * unit(&a);
    let eig = SymmetricEigen::new(m.transpose() * &m);
    let trace: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
    let expected = 1.0 - trace * trace;
    assert!(fit.residual > 0.0 && fit.residual < 1e-3);
    assert!((fit.residual - expected).abs() < 1e-12, "{} vs {expected}", fit.residual);
}

#[test]
fn planted_linear_fields_give_orthogonal_vectors() {
    let truth = whitened(24, 3, 17);
    let basis = rotation(23);
    let sol = nonmetric_mds(&euclidean(&truth, |d| d.powf(1.5)), 3, &options()).unwrap();
    let aligned = procrustes_align(&truth, &sol.coordinates).unwrap().aligned;
    let mut vectors = vec![];
    for k in 0..3 {
        let u: Vec<f64> = basis.column(k).iter().copied().collect();
        let q: Vec<f64> = (0..24).map(|i| 2.5 * truth.row(i).iter().zip(&u).map(|(x, y)| x * y).sum::<f64>()).collect();
        let column = ParameterColumn::new(format!("q{k}"), q, Transform::ZScore).unwrap();
        let p = gradient(&column, &aligned).unwrap();
        let angle = vector_angle(&p, &ParameterVector::new("u", u)).unwrap();
        assert!(angle < 5.0, "field {k}: {angle}°");
        vectors.push(p);
    }
    for e in angle_table(&vectors).unwrap() {
        assert!((e.degrees - 90.0).abs() < 5.0, "{e:?}");
    }
}

#[test]
fn random_column_is_weakly_correlated() {
    let coords = Configuration::from_rows(&gaussian_rows(400, 2, 1));
    let q: Vec<f64> = gaussian_rows(400, 1, 2).concat();
    let observed = pearson(&q, &coords.column(0)).unwrap().abs();
    // permutation null for the same data
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut null: Vec<f64> = (0..200)
        .map(|_| {
            let mut p = q.clone();
            rand::seq::SliceRandom::shuffle(p.as_mut_slice(), &mut rng);
            pearson(&p, &coords.column(0)).unwrap().abs()
        })
        .collect();
    null.sort_by(f64::total_cmp);
    assert!(observed < null[189], "{observed} vs 95th percentile {}", null[189]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_rotates_with_coordinates(seed in 0u64..1000, angle_seed in 0u64..1000) {
        let coords = Configuration::from_rows(&gaussian_rows(9, 3, seed));
        let q: Vec<f64> = gaussian_rows(9, 1, seed + 1).concat();
        let col = ParameterColumn::new("q", q, Transform::Raw).unwrap();
        let t = rotation(angle_seed);
        let p = gradient(&col, &coords).unwrap();
        let pt = gradient(&col, &transform(&coords, &t, 0.0)).unwrap();
        let expected = t.transpose() * nalgebra::DVector::from_vec(p.components.clone());
        for d in 0..3 {
            prop_assert!((pt.components[d] - expected[d]).abs() < 1e-10);
        }
    }

    #[test]
    fn angle_ignores_positive_scale(a in proptest::collection::vec(-5.0f64..5.0, 3), b in proptest::collection::vec(-5.0f64..5.0, 3), s in 0.01f64..100.0) {
        let va = ParameterVector::new("a", a.clone());
        let vb = ParameterVector::new("b", b);
        prop_assume!(va.norm > 1e-3 && vb.norm > 1e-3);
        let scaled = ParameterVector::new("a", a.iter().map(|x| x * s).collect());
        let angle = vector_angle(&va, &vb).unwrap();
        prop_assert!((0.0..=180.0).contains(&angle));
        prop_assert!((angle - vector_angle(&scaled, &vb).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn correlations_ignore_affine_rescaling(seed in 0u64..1000, scale in 0.1f64..50.0, shift in -100.0f64..100.0) {
        let coords = Configuration::from_rows(&gaussian_rows(12, 3, seed));
        let q: Vec<f64> = gaussian_rows(12, 1, seed + 7).concat();
        let moved: Vec<f64> = q.iter().map(|v| scale * v + shift).collect();
        let a = correlations(&[ParameterColumn::new("q", q, Transform::Raw).unwrap()], &coords).unwrap();
        let b = correlations(&[ParameterColumn::new("q", moved, Transform::Raw).unwrap()], &coords).unwrap();
        for d in 0..3 {
            prop_assert!((a.get(0, d).unwrap() - b.get(0, d).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn optimizer_stress_never_rises(seed in 0u64..200) {
        let rows = gaussian_rows(9, 1, seed);
        let diss = DissimilarityMatrix::from_fn((1..=9).collect(), |i, j| ((rows[i][0] - rows[j][0]).abs() * 3.0).round()).unwrap();
        let sol = nonmetric_mds(&diss, 2, &MdsOptions { restarts: 2, seed, ..MdsOptions::default() }).unwrap();
        prop_assert!(sol.history.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }
}
