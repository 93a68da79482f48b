//! Dense multilayer perceptron.
//!
//! Layer `ℓ` computes `h^ℓ = ρ^ℓ(W^ℓ h^{ℓ-1} + b^ℓ)` with `W^ℓ` stored
//! `out × in`. Batches are row-major: one sample per row, so a layer applies
//! `H · Wᵀ + 1 bᵀ`.
//!
//! A layer can be frozen; [`Mlp::backward`] then reports exactly-zero
//! gradients for it while still propagating through it.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pca::PcaModel;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    /// Lipschitz constant of the scalar function.
    pub fn lipschitz(self) -> f64 {
        1.0
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative at `z`; the ReLU subgradient at 0 is 0.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Weight initialization scheme. Each seeded scheme draws from its own stream.
#[derive(Debug, Clone, PartialEq)]
pub enum Initializer {
    /// `Normal(0, 2 / in_dim)`.
    He { seed: u64 },
    /// `Uniform(±√(6 / (in_dim + out_dim)))`.
    Xavier { seed: u64 },
    /// Orthonormal rows (or columns, for tall layers) from a QR of a Gaussian matrix.
    Orthogonal { seed: u64 },
    /// `W = W_rᵀ`, so the layer computes the PCA projection of its input.
    PrincipalComponents(Box<PcaModel>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub initializer: Initializer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub frozen: bool,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::contract(format!(
                "bias length {} does not match {} output units",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
            frozen: false,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// `ρ(x · Wᵀ + b)`, also returning the pre-activation.
    fn apply(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let mut pre = x.matmul_t(&self.weights)?;
        for i in 0..pre.rows() {
            for (z, b) in pre.row_mut(i).iter_mut().zip(&self.bias) {
                *z += b;
            }
        }
        let post = match self.activation {
            Activation::Identity => pre.clone(),
            act => {
                let mut h = pre.clone();
                h.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
                h
            }
        };
        Ok((pre, post))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Everything `backward` needs from a forward call.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub input: Matrix,
    /// Pre-activation `W h + b` per layer.
    pub pre_activations: Vec<Matrix>,
    /// Post-activation output per layer; the last entry is the network output.
    pub activations: Vec<Matrix>,
}

impl ForwardPass {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("at least one layer")
    }
}

/// Per-layer parameter gradients, shape-matched to the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.max_abs() == 0.0)
            && self.biases.iter().flatten().all(|&b| b == 0.0)
    }
}

/// Realize a network from layer specs.
///
/// Seeded initializers draw from the stream `(master_seed, seed)`, so two
/// networks that share a layer seed get bitwise-identical weights for that
/// layer regardless of what the other layers look like. Biases start at 0.
pub fn build(specs: &[LayerSpec], master_seed: u64) -> Result<Mlp> {
    if specs.is_empty() {
        return Err(Error::contract("a network needs at least one layer"));
    }
    let mut layers = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        if i > 0 && specs[i - 1].out_dim != spec.in_dim {
            return Err(Error::contract(format!(
                "layer {i} expects {} inputs but layer {} produces {}",
                spec.in_dim,
                i - 1,
                specs[i - 1].out_dim
            )));
        }
        if spec.in_dim == 0 || spec.out_dim == 0 {
            return Err(Error::contract(format!("layer {i} has a zero dimension")));
        }
        let weights = init_weights(spec, master_seed)?;
        layers.push(Layer::new(weights, vec![0.0; spec.out_dim], spec.activation)?);
    }
    Ok(Mlp { layers })
}

fn init_weights(spec: &LayerSpec, master_seed: u64) -> Result<Matrix> {
    let (fan_in, fan_out) = (spec.in_dim, spec.out_dim);
    let stream = |seed: u64| rng::rng_for(&[rng::tag::LAYER, master_seed, seed]);
    Ok(match &spec.initializer {
        Initializer::He { seed } => {
            let mut g = stream(*seed);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
            Matrix::from_fn(fan_out, fan_in, |_, _| normal.sample(&mut g))
        }
        Initializer::Xavier { seed } => {
            let mut g = stream(*seed);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Matrix::from_fn(fan_out, fan_in, |_, _| g.random_range(-limit..limit))
        }
        Initializer::Orthogonal { seed } => {
            let mut g = stream(*seed);
            if fan_out <= fan_in {
                let gauss = Matrix::random_normal(fan_in, fan_out, &mut g);
                linalg::qr(&gauss)?.0.transpose()
            } else {
                let gauss = Matrix::random_normal(fan_out, fan_in, &mut g);
                linalg::qr(&gauss)?.0
            }
        }
        Initializer::PrincipalComponents(model) => {
            if model.n_features() != fan_in || model.n_components() != fan_out {
                return Err(Error::contract(format!(
                    "principal-component layer is {fan_in}->{fan_out} but the PCA model maps {}->{}",
                    model.n_features(),
                    model.n_components()
                )));
            }
            model.components.transpose()
        }
    })
}

impl Mlp {
    /// Assemble from explicit layers; dimensions must chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("a network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::contract(format!(
                    "layer {} expects {} inputs but layer {i} produces {}",
                    i + 1,
                    pair[1].in_dim(),
                    pair[0].out_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardPass> {
        self.check_input(x)?;
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut activations: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (pre, post) = layer.apply(activations.last().unwrap_or(x))?;
            pre_activations.push(pre);
            activations.push(post);
        }
        Ok(ForwardPass {
            input: x.clone(),
            pre_activations,
            activations,
        })
    }

    /// Output only, without keeping intermediate activations.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = self.layers[0].apply(x)?.1;
        for layer in &self.layers[1..] {
            h = layer.apply(&h)?.1;
        }
        Ok(h)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::contract(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Backpropagate `upstream = ∂loss/∂output` through a matching forward pass.
    pub fn backward(&self, pass: &ForwardPass, upstream: &Matrix) -> Result<Gradients> {
        let n_layers = self.layers.len();
        if pass.activations.len() != n_layers || pass.pre_activations.len() != n_layers {
            return Err(Error::contract("forward pass does not match this network"));
        }
        if upstream.shape() != pass.output().shape() {
            return Err(Error::contract(format!(
                "upstream gradient is {:?}, output is {:?}",
                upstream.shape(),
                pass.output().shape()
            )));
        }
        let mut weights = vec![Matrix::zeros(0, 0); n_layers];
        let mut biases = vec![Vec::new(); n_layers];
        let mut delta = upstream.clone();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            // ∂/∂pre = ∂/∂post ⊙ ρ'(pre)
            if layer.activation != Activation::Identity {
                let pre = &pass.pre_activations[l];
                delta
                    .as_mut_slice()
                    .iter_mut()
                    .zip(pre.as_slice())
                    .for_each(|(d, &z)| *d *= layer.activation.derivative(z));
            }
            let input = if l == 0 { &pass.input } else { &pass.activations[l - 1] };
            if layer.frozen {
                weights[l] = Matrix::zeros(layer.out_dim(), layer.in_dim());
                biases[l] = vec![0.0; layer.out_dim()];
            } else {
                weights[l] = delta.t_matmul(input)?;
                let mut db = vec![0.0; layer.out_dim()];
                for i in 0..delta.rows() {
                    db.iter_mut().zip(delta.row(i)).for_each(|(b, d)| *b += d);
                }
                biases[l] = db;
            }
            if l > 0 {
                delta = delta.matmul(&layer.weights)?;
            }
        }
        Ok(Gradients { weights, biases })
    }

    pub fn set_frozen(&mut self, layer_index: usize, frozen: bool) -> Result<()> {
        let n = self.layers.len();
        let layer = self.layers.get_mut(layer_index).ok_or_else(|| {
            Error::contract(format!("layer index {layer_index} out of range for {n} layers"))
        })?;
        layer.frozen = frozen;
        Ok(())
    }

    pub fn is_frozen(&self, layer_index: usize) -> bool {
        self.layers[layer_index].frozen
    }

    /// Zero-filled gradients shaped like this network.
    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"PCSINIT1";

/// Write a checkpoint: magic, layer count, then per layer the dims, activation
/// tag, freeze flag and little-endian `f64` weights (row-major) and biases.
pub fn save_checkpoint<W: Write>(net: &Mlp, mut w: W) -> io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for layer in &net.layers {
        w.write_all(&(layer.in_dim() as u32).to_le_bytes())?;
        w.write_all(&(layer.out_dim() as u32).to_le_bytes())?;
        w.write_all(&[layer.activation.tag(), layer.frozen as u8])?;
        for v in layer.weights.as_slice().iter().chain(&layer.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn load_checkpoint<R: Read>(mut r: R) -> Result<Mlp> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::contract("not a network checkpoint (bad magic)"));
    }
    let n_layers = read_u32(&mut r)? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let in_dim = read_u32(&mut r)? as usize;
        let out_dim = read_u32(&mut r)? as usize;
        let mut flags = [0u8; 2];
        r.read_exact(&mut flags)?;
        let activation = Activation::from_tag(flags[0])
            .ok_or_else(|| Error::contract(format!("layer {i}: unknown activation tag {}", flags[0])))?;
        let weights = Matrix::new(out_dim, in_dim, read_f64s(&mut r, out_dim * in_dim)?)?;
        let bias = read_f64s(&mut r, out_dim)?;
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::contract(format!("layer {i}: non-finite bias")));
        }
        let mut layer = Layer::new(weights, bias, activation)?;
        layer.frozen = flags[1] != 0;
        layers.push(layer);
    }
    Mlp::from_layers(layers)
}

pub fn save_checkpoint_file(net: &Mlp, path: &Path) -> Result<()> {
    save_checkpoint(net, BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn load_checkpoint_file(path: &Path) -> Result<Mlp> {
    load_checkpoint(BufReader::new(File::open(path)?))
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}
