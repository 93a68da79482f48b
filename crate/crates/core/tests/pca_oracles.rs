use pcsinit_core::data::{self, SyntheticKind, SyntheticParams};
use pcsinit_core::linalg::{self, Matrix};
use pcsinit_core::pca::{self, ComponentSelection};
use pcsinit_core::rng;
use proptest::prelude::*;

fn anisotropic(n: usize, seed: u64) -> Matrix {
    let mut g = rng::rng_for(&[seed]);
    let z = Matrix::random_normal(n, 10, &mut g);
    let mix = Matrix::from_fn(10, 10, |i, j| if i == j { 10.0 - i as f64 } else { 0.3 * ((i + 2 * j) % 5) as f64 });
    z.matmul(&mix).unwrap()
}

#[test]
fn components_match_covariance_eigendecomposition() {
    let x = anisotropic(200, 1);
    let model = pca::fit(&x, ComponentSelection::FixedCount(10)).unwrap();
    let (mean, scale, _) = pca::column_stats(&x);
    let z = pca::standardize_with(&x, &mean, &scale);
    let cov = z.t_matmul(&z).unwrap().scale(1.0 / 199.0);
    let eig = linalg::sym_eig(&cov).unwrap();
    for k in 0..10 {
        assert!((model.eigenvalues[k] / 199.0 - eig.eigenvalues[k]).abs() <= 1e-6 * eig.eigenvalues[0]);
        for j in 0..10 {
            assert!((model.components.get(j, k) - eig.eigenvectors.get(j, k)).abs() <= 1e-6, "component {k}");
        }
    }
    let ortho = model.components.t_matmul(&model.components).unwrap().sub(&Matrix::identity(10)).unwrap();
    assert!(ortho.max_abs() <= 1e-8);
    let cum: f64 = model.explained_variance_ratio.iter().sum();
    assert!(cum <= 1.0 + 1e-10);
    assert!(model.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn projection_decorrelates_fit_data() {
    let x = anisotropic(300, 2);
    let model = pca::fit(&x, ComponentSelection::VarianceThreshold(0.9)).unwrap();
    let y = pca::project(&model, &x).unwrap();
    let n = y.rows() as f64;
    let r = y.cols();
    let cov = y.t_matmul(&y).unwrap().scale(1.0 / (n - 1.0));
    for a in 0..r {
        for b in 0..r {
            if a == b {
                let want = model.eigenvalues[a] / (n - 1.0);
                assert!((cov.get(a, a) - want).abs() <= 1e-6 * want);
            } else {
                assert!(cov.get(a, b).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn rank_one_projection_by_hand() {
    let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
    let model = pca::fit(&x, ComponentSelection::VarianceThreshold(0.95)).unwrap();
    // each column has sample std √2, so (1, 1) standardizes to (1/√2, 1/√2)
    let y = pca::project(&model, &Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap()).unwrap();
    let s = 2f64.sqrt();
    assert!((model.scale[0] - s).abs() < 1e-12);
    assert!((y.get(0, 0) - 2.0 / s * (1.0 / s)).abs() < 1e-12);
}

#[test]
fn fit_is_invariant_to_row_order() {
    let x = anisotropic(120, 3);
    let mut rows: Vec<usize> = (0..120).rev().collect();
    rows.rotate_left(17);
    let a = pca::fit(&x, ComponentSelection::VarianceThreshold(0.95)).unwrap();
    let b = pca::fit(&x.select_rows(&rows), ComponentSelection::VarianceThreshold(0.95)).unwrap();
    assert_eq!(a.n_components(), b.n_components());
    assert!(a.components.max_abs_diff(&b.components) < 1e-9);
}

fn max_principal_angle(a: &Matrix, b: &Matrix) -> f64 {
    let s = linalg::svd(&a.t_matmul(b).unwrap()).unwrap();
    let smallest = *s.singular_values.last().unwrap();
    smallest.min(1.0).acos()
}

#[test]
fn subset_fit_recovers_signal_subspace() {
    let params = SyntheticParams { rank: 3, ..SyntheticKind::LowRankPlusNoise.default_params() };
    let ds = data::make_synthetic(SyntheticKind::LowRankPlusNoise, 10_000, 20, 3, params, 4).unwrap();
    let full = pca::fit(&ds.features, ComponentSelection::FixedCount(3)).unwrap();
    let sub = pca::fit_subset(&ds.features, 0.2, 9, ComponentSelection::FixedCount(3)).unwrap();
    assert_eq!(sub.n_fitted, 2000);
    let angle = max_principal_angle(&full.components, &sub.components);
    assert!(angle < 0.1, "angle {angle}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn raising_the_threshold_never_lowers_rank(seed in any::<u64>(), lo in 0.05f64..1.0, hi in 0.05f64..1.0) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let x = Matrix::random_normal(30, 8, &mut rng::rng_for(&[seed]));
        let a = pca::fit(&x, ComponentSelection::VarianceThreshold(lo)).unwrap();
        let b = pca::fit(&x, ComponentSelection::VarianceThreshold(hi)).unwrap();
        prop_assert!(a.n_components() <= b.n_components());
    }
}
