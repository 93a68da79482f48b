use pcsinit_core::data::{self, SyntheticKind};
use pcsinit_core::linalg::Matrix;
use pcsinit_core::network::{self, Activation, Initializer, LayerSpec, Mlp};
use pcsinit_core::pca::{self, ComponentSelection};
use pcsinit_core::rng;
use pcsinit_core::training::{adam_step, cross_entropy, AdamConfig, AdamState};

fn relu_net(widths: &[usize], seed: u64) -> Mlp {
    let specs: Vec<LayerSpec> = widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec {
            in_dim: w[0],
            out_dim: w[1],
            activation: Activation::Relu,
            initializer: Initializer::He { seed: i as u64 },
        })
        .collect();
    let mut net = network::build(&specs, seed).unwrap();
    // nonzero biases so their gradients are exercised too
    let mut g = rng::rng_for(&[seed, 99]);
    for layer in net.layers_mut() {
        let b = Matrix::random_normal(1, layer.bias.len(), &mut g);
        layer.bias.copy_from_slice(&b.as_slice().iter().map(|v| 0.1 * v).collect::<Vec<_>>());
    }
    net
}

/// Scalar objective `Σ output ⊙ r`.
fn objective(net: &Mlp, x: &Matrix, r: &Matrix) -> f64 {
    let y = net.predict(x).unwrap();
    y.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
}

fn close(fd: f64, an: f64) -> bool {
    (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-6)
}

#[test]
fn gradients_match_central_differences() {
    const EPS: f64 = 1e-5;
    for seed in 0..20u64 {
        let mut g = rng::rng_for(&[seed, 7]);
        let widths = [5, 8, 7, 6, 3];
        let mut net = relu_net(&widths, seed);
        let x = Matrix::random_normal(4, widths[0], &mut g);
        let r = Matrix::random_normal(4, widths[4], &mut g);
        let pass = net.forward(&x).unwrap();
        let grads = net.backward(&pass, &r).unwrap();
        for l in 0..net.n_layers() {
            let (rows, cols) = net.layers()[l].weights.shape();
            for i in 0..rows {
                for j in 0..cols {
                    let w0 = net.layers()[l].weights.get(i, j);
                    net.layers_mut()[l].weights.set(i, j, w0 + EPS);
                    let up = objective(&net, &x, &r);
                    net.layers_mut()[l].weights.set(i, j, w0 - EPS);
                    let down = objective(&net, &x, &r);
                    net.layers_mut()[l].weights.set(i, j, w0);
                    let fd = (up - down) / (2.0 * EPS);
                    let an = grads.weights[l].get(i, j);
                    assert!(close(fd, an), "seed {seed} layer {l} w[{i},{j}]: fd {fd} vs {an}");
                }
                let b0 = net.layers()[l].bias[i];
                net.layers_mut()[l].bias[i] = b0 + EPS;
                let up = objective(&net, &x, &r);
                net.layers_mut()[l].bias[i] = b0 - EPS;
                let down = objective(&net, &x, &r);
                net.layers_mut()[l].bias[i] = b0;
                let fd = (up - down) / (2.0 * EPS);
                assert!(close(fd, grads.biases[l][i]), "seed {seed} layer {l} b[{i}]");
            }
        }
    }
}

#[test]
fn principal_component_layer_reproduces_projection() {
    let ds = data::make_synthetic(SyntheticKind::LowRankPlusNoise, 200, 12, 2, SyntheticKind::LowRankPlusNoise.default_params(), 5).unwrap();
    let (train, _) = data::split(&ds, 0.7, 5).unwrap();
    let model = pca::fit(&train.features, ComponentSelection::VarianceThreshold(0.95)).unwrap();
    let spec = LayerSpec {
        in_dim: 12,
        out_dim: model.n_components(),
        activation: Activation::Identity,
        initializer: Initializer::PrincipalComponents(Box::new(model.clone())),
    };
    let net = network::build(&[spec], 0).unwrap();
    let h = net.predict(&train.features).unwrap();
    let z = pca::project(&model, &train.features).unwrap();
    assert!(h.max_abs_diff(&z) <= 1e-6);
}

fn one_step(net: &mut Mlp, state: &mut AdamState, x: &Matrix, y: &[usize]) {
    let pass = net.forward(x).unwrap();
    let (_, d) = cross_entropy(pass.output(), y).unwrap();
    let grads = net.backward(&pass, &d).unwrap();
    adam_step(state, net, &grads, &AdamConfig::default()).unwrap();
}

#[test]
fn freezing_holds_layers_fixed() {
    let mut g = rng::rng_for(&[3]);
    let x = Matrix::random_normal(16, 5, &mut g);
    let y: Vec<usize> = (0..16).map(|i| i % 3).collect();
    let mut net = relu_net(&[5, 8, 6, 3], 3);
    let start = net.clone();
    let mut state = AdamState::new(&net);

    net.set_frozen(0, true).unwrap();
    for _ in 0..5 {
        one_step(&mut net, &mut state, &x, &y);
    }
    assert_eq!(net.layers()[0].weights, start.layers()[0].weights);
    assert_eq!(net.layers()[0].bias, start.layers()[0].bias);
    assert_ne!(net.layers()[1].weights, start.layers()[1].weights);
    assert_eq!(state.layer_steps(0), None);

    net.set_frozen(0, false).unwrap();
    one_step(&mut net, &mut state, &x, &y);
    assert_ne!(net.layers()[0].weights, start.layers()[0].weights);
    assert_eq!(state.layer_steps(0), Some(1));

    let mid = net.clone();
    net.set_frozen(1, true).unwrap();
    one_step(&mut net, &mut state, &x, &y);
    assert_eq!(net.layers()[1].weights, mid.layers()[1].weights);
    assert_eq!(net.layers()[1].bias, mid.layers()[1].bias);
    assert_ne!(net.layers()[0].weights, mid.layers()[0].weights);
    assert_ne!(net.layers()[2].weights, mid.layers()[2].weights);
}
