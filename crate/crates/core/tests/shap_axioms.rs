use pcsinit_core::explain::{self, back_project, exact_shapley, global_importance, kernel_shap, ShapConfig, UnitKind};
use pcsinit_core::linalg::Matrix;
use pcsinit_core::network::{self, Activation, Initializer, LayerSpec, Mlp};
use pcsinit_core::pca::{self, PcaModel};
use pcsinit_core::rng;

fn random_net(p: usize, classes: usize, seed: u64) -> Mlp {
    let specs = vec![
        LayerSpec { in_dim: p, out_dim: 8, activation: Activation::Relu, initializer: Initializer::He { seed: 1 } },
        LayerSpec { in_dim: 8, out_dim: 8, activation: Activation::Relu, initializer: Initializer::He { seed: 2 } },
        LayerSpec { in_dim: 8, out_dim: classes, activation: Activation::Identity, initializer: Initializer::Xavier { seed: 3 } },
    ];
    network::build(&specs, seed).unwrap()
}

#[test]
fn exact_mode_matches_enumeration_and_is_efficient() {
    for seed in 0..10u64 {
        let net = random_net(6, 3, seed);
        let mut g = rng::rng_for(&[seed, 1]);
        let x = Matrix::random_normal(1, 6, &mut g);
        let bg = Matrix::random_normal(5, 6, &mut g);
        let attr = kernel_shap(|m: &Matrix| net.predict(m), x.row(0), &ShapConfig::exact(bg.clone())).unwrap();
        let out = net.predict(&x).unwrap();
        for c in 0..3 {
            let total = attr.base_value[c] + attr.values[c].iter().sum::<f64>();
            assert!((total - out.get(0, c)).abs() <= 1e-6);
            let oracle = exact_shapley(|m: &Matrix| net.predict(m), x.row(0), &bg, c).unwrap();
            for (j, (a, o)) in attr.values[c].iter().zip(&oracle).enumerate() {
                assert!((a - o).abs() <= 1e-6, "seed {seed} class {c} feature {j}");
            }
        }
    }
}

/// Net whose first two inputs share a weight column and whose last input has
/// a zero column.
fn symmetric_dummy_net(seed: u64) -> Mlp {
    let mut net = random_net(6, 2, seed);
    let w = &mut net.layers_mut()[0].weights;
    for i in 0..w.rows() {
        let v = w.get(i, 0);
        w.set(i, 1, v);
        w.set(i, 5, 0.0);
    }
    net
}

#[test]
fn symmetry_and_dummy_axioms() {
    for seed in 0..10u64 {
        let net = symmetric_dummy_net(seed);
        let mut g = rng::rng_for(&[seed, 2]);
        let mut x = Matrix::random_normal(1, 6, &mut g);
        let v = x.get(0, 0);
        x.set(0, 1, v);
        let mut bg = Matrix::random_normal(4, 6, &mut g);
        for b in 0..4 {
            let v = bg.get(b, 0);
            bg.set(b, 1, v);
        }
        let attr = kernel_shap(|m: &Matrix| net.predict(m), x.row(0), &ShapConfig::exact(bg)).unwrap();
        for c in 0..2 {
            assert!((attr.values[c][0] - attr.values[c][1]).abs() <= 1e-8, "symmetry, seed {seed}");
            assert!(attr.values[c][5].abs() <= 1e-8, "dummy, seed {seed}");
        }
    }
}

#[test]
fn sampled_mode_close_to_enumeration() {
    for seed in 0..20u64 {
        let net = random_net(6, 2, 50 + seed);
        let mut g = rng::rng_for(&[seed, 3]);
        let x = Matrix::random_normal(1, 6, &mut g);
        let bg = Matrix::random_normal(5, 6, &mut g);
        let attr = kernel_shap(|m: &Matrix| net.predict(m), x.row(0), &ShapConfig::sampled(bg.clone(), 2000, seed)).unwrap();
        assert!(!attr.exact);
        for c in 0..2 {
            let oracle = exact_shapley(|m: &Matrix| net.predict(m), x.row(0), &bg, c).unwrap();
            for (a, o) in attr.values[c].iter().zip(&oracle) {
                assert!((a - o).abs() <= 0.05);
            }
        }
    }
}

#[test]
fn sampled_mode_on_many_features_keeps_efficiency() {
    let net = random_net(30, 2, 4);
    let mut g = rng::rng_for(&[4]);
    let x = Matrix::random_normal(1, 30, &mut g);
    let bg = Matrix::random_normal(10, 30, &mut g);
    let attr = kernel_shap(|m: &Matrix| net.predict(m), x.row(0), &ShapConfig::sampled(bg, 500, 1)).unwrap();
    assert!(attr.residual.iter().all(|&r| r <= 1e-9));
}

#[test]
fn identity_loading_back_projection_equals_direct_attribution() {
    let p = 4;
    let model = PcaModel::from_parts(Matrix::identity(p), vec![1.0; p], vec![0.25; p], vec![0.0; p], vec![1.0; p], 10).unwrap();
    let net = random_net(p, 2, 6);
    let mut g = rng::rng_for(&[6]);
    let x = Matrix::random_normal(1, p, &mut g);
    let bg = Matrix::random_normal(6, p, &mut g);

    let z = pca::project(&model, &x).unwrap();
    let zbg = pca::project(&model, &bg).unwrap();
    let pc = kernel_shap(|m: &Matrix| net.predict(m), z.row(0), &ShapConfig::exact(zbg))
        .unwrap()
        .with_unit_kind(UnitKind::PrincipalComponent);
    let bp = back_project(&pc, &model).unwrap();
    let pipeline = |m: &Matrix| net.predict(&pca::project(&model, m)?);
    let direct = kernel_shap(pipeline, x.row(0), &ShapConfig::exact(bg)).unwrap();
    for c in 0..2 {
        assert!(bp.attribution.residual[c] <= 1e-12);
        for j in 0..p {
            assert_eq!(bp.attribution.values[c][j], pc.values[c][j]);
            assert!((bp.attribution.values[c][j] - direct.values[c][j]).abs() <= 1e-9);
        }
    }
}

#[test]
fn global_importance_matches_naive_recompute() {
    let mut g = rng::rng_for(&[8]);
    let attrs: Vec<_> = (0..50)
        .map(|_| {
            let v = Matrix::random_normal(2, 7, &mut g);
            explain::Attribution {
                values: vec![v.row(0).to_vec(), v.row(1).to_vec()],
                base_value: vec![0.0; 2],
                output: vec![0.0; 2],
                unit_kind: UnitKind::Feature,
                provenance: explain::Provenance::Direct,
                residual: vec![0.0; 2],
                exact: true,
                regularization: 0.0,
                regularization_increased: false,
            }
        })
        .collect();
    let gi = global_importance(&attrs).unwrap();
    for c in 0..2 {
        let mut naive: Vec<(usize, f64)> = (0..7)
            .map(|u| {
                let mut s = 0.0;
                for a in &attrs {
                    s += a.values[c][u].abs();
                }
                (u, s / 50.0)
            })
            .collect();
        naive.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        for (got, want) in gi.per_class[c].iter().zip(&naive) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() <= 1e-12);
        }
    }
}
