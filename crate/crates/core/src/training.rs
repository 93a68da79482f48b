//! Cross-entropy loss, Adam, and the two-phase trainer.
//!
//! The PCsInit variants start with the first layer frozen at its
//! principal-component initialization for `n_frozen` epochs and then train
//! the whole network until `n_total`. `pca_nn` trains the layers after the
//! first on PCA-projected inputs; `plain_nn` uses a conventional initializer
//! throughout.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{self, Activation, Initializer, LayerSpec, Mlp};
use crate::pca::{self, ComponentSelection, PcaModel};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Variant {
    #[serde(rename = "pcsinit")]
    PcsInit,
    #[serde(rename = "pcsinit_act")]
    PcsInitAct,
    #[serde(rename = "pcsinit_sub")]
    PcsInitSub { subset_fraction: f64 },
    PcaNn,
    PlainNn,
}

impl Variant {
    pub const DEFAULT_SUBSET_FRACTION: f64 = 0.2;

    pub fn name(&self) -> &'static str {
        match self {
            Variant::PcsInit => "pcsinit",
            Variant::PcsInitAct => "pcsinit_act",
            Variant::PcsInitSub { .. } => "pcsinit_sub",
            Variant::PcaNn => "pca_nn",
            Variant::PlainNn => "plain_nn",
        }
    }

    /// Variants whose first layer is initialized from principal components
    /// and trained with the freeze/unfreeze schedule.
    pub fn uses_pc_layer(&self) -> bool {
        matches!(
            self,
            Variant::PcsInit | Variant::PcsInitAct | Variant::PcsInitSub { .. }
        )
    }

    pub fn all(subset_fraction: f64) -> [Variant; 5] {
        [
            Variant::PcsInit,
            Variant::PcsInitAct,
            Variant::PcsInitSub { subset_fraction },
            Variant::PcaNn,
            Variant::PlainNn,
        ]
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    /// Accepts the variant names; `pcsinit_sub` takes an optional
    /// `:fraction` suffix.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let v = match head {
            "pcsinit" => Variant::PcsInit,
            "pcsinit_act" => Variant::PcsInitAct,
            "pcsinit_sub" => {
                let subset_fraction = match arg {
                    Some(a) => a
                        .parse()
                        .map_err(|_| Error::contract(format!("bad subset fraction {a:?}")))?,
                    None => Self::DEFAULT_SUBSET_FRACTION,
                };
                return Ok(Variant::PcsInitSub { subset_fraction });
            }
            "pca_nn" => Variant::PcaNn,
            "plain_nn" => Variant::PlainNn,
            other => return Err(Error::contract(format!("unknown variant {other:?}"))),
        };
        if arg.is_some() {
            return Err(Error::contract(format!("variant {head} takes no argument")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineInit {
    He,
    Xavier,
    Orthogonal,
}

impl BaselineInit {
    fn initializer(self, seed: u64) -> Initializer {
        match self {
            BaselineInit::He => Initializer::He { seed },
            BaselineInit::Xavier => Initializer::Xavier { seed },
            BaselineInit::Orthogonal => Initializer::Orthogonal { seed },
        }
    }
}

impl std::str::FromStr for BaselineInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "he" => Ok(BaselineInit::He),
            "xavier" => Ok(BaselineInit::Xavier),
            "orthogonal" => Ok(BaselineInit::Orthogonal),
            other => Err(Error::contract(format!("unknown initializer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub n_frozen: usize,
    pub n_total: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// `None`: 32, or the whole training set when it has fewer than 64 rows.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub baseline_initializer: BaselineInit,
    /// Number of weight layers counting the first (PCA) layer.
    pub n_layers: usize,
    pub selection: ComponentSelection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::PcsInit,
            n_frozen: 30,
            n_total: 200,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: None,
            seed: 0,
            baseline_initializer: BaselineInit::He,
            n_layers: 5,
            selection: ComponentSelection::VarianceThreshold(0.95),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_frozen > self.n_total {
            return Err(Error::contract(format!(
                "n_frozen = {} exceeds n_total = {}",
                self.n_frozen, self.n_total
            )));
        }
        if self.n_total == 0 {
            return Err(Error::contract("n_total must be at least 1"));
        }
        self.adam().validate()?;
        if self.batch_size == Some(0) {
            return Err(Error::contract("batch size must be at least 1"));
        }
        if self.n_layers < 2 {
            return Err(Error::contract(format!(
                "need at least 2 layers, got {}",
                self.n_layers
            )));
        }
        if let Variant::PcsInitSub { subset_fraction } = self.variant {
            if !(subset_fraction > 0.0 && subset_fraction <= 1.0) {
                return Err(Error::contract(format!(
                    "subset fraction {subset_fraction} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn resolved_batch_size(&self, rows: usize) -> usize {
        match self.batch_size {
            Some(b) => b,
            None if rows < 64 => rows.max(1),
            None => 32,
        }
    }
}

/// Mean cross-entropy of `softmax(logits)` against `labels`, and its gradient
/// with respect to the logits.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (n, c) = logits.shape();
    if labels.len() != n {
        return Err(Error::contract(format!("{} labels for {n} rows", labels.len())));
    }
    if n == 0 {
        return Err(Error::contract("cross-entropy of an empty batch"));
    }
    let mut grad = Matrix::zeros(n, c);
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::contract(format!("label {y} out of range for {c} classes")));
        }
        let row = logits.row(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - m).exp()).sum();
        let lse = m + sum.ln();
        total += lse - row[y];
        let g = grad.row_mut(i);
        for (k, z) in row.iter().enumerate() {
            g[k] = (z - lse).exp() / n as f64;
        }
        g[y] -= 1.0 / n as f64;
    }
    Ok((total / n as f64, grad))
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Mean cross-entropy loss and argmax accuracy.
pub fn evaluate(net: &Mlp, x: &Matrix, labels: &[usize]) -> Result<(f64, f64)> {
    let n = x.rows();
    if n == 0 || labels.len() != n {
        return Err(Error::contract("evaluation needs a nonempty split with one label per row"));
    }
    const CHUNK: usize = 4096;
    let (mut loss, mut correct) = (0.0, 0usize);
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let logits = net.predict(&x.select_rows(&idx))?;
        let (l, _) = cross_entropy(&logits, &labels[start..end])?;
        loss += l * (end - start) as f64;
        correct += (0..end - start)
            .filter(|&i| argmax(logits.row(i)) == labels[start + i])
            .count();
        start = end;
    }
    Ok((loss / n as f64, correct as f64 / n as f64))
}

/// Predicted class per row.
pub fn predict_classes(net: &Mlp, x: &Matrix) -> Result<Vec<usize>> {
    let logits = net.predict(x)?;
    Ok((0..logits.rows()).map(|i| argmax(logits.row(i))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::contract(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::contract("Adam betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::contract("Adam eps must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates for one parameter block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

/// One Adam update of `params` in place. Empty moments are initialized to
/// zero on the first call.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut Moments,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::contract(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    if moments.m.is_empty() && moments.step == 0 {
        moments.m = vec![0.0; params.len()];
        moments.v = vec![0.0; params.len()];
    }
    if moments.m.len() != params.len() || moments.v.len() != params.len() {
        return Err(Error::contract("Adam state does not match the parameter block"));
    }
    moments.step += 1;
    let t = moments.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for ((w, &g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(moments.m.iter_mut().zip(moments.v.iter_mut()))
    {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        *w -= config.learning_rate * (*m / c1) / ((*v / c2).sqrt() + config.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct LayerMoments {
    weights: Moments,
    bias: Moments,
}

/// Optimizer state for a whole network. A layer's moments are created the
/// first time it is updated while unfrozen.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    layers: Vec<Option<LayerMoments>>,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        Self {
            layers: vec![None; net.n_layers()],
        }
    }

    /// Update step count of layer `i`, or `None` if it has never been updated.
    pub fn layer_steps(&self, i: usize) -> Option<u64> {
        self.layers.get(i)?.as_ref().map(|l| l.weights.step)
    }
}

/// Apply one Adam step to every unfrozen layer.
pub fn adam_step(
    state: &mut AdamState,
    net: &mut Mlp,
    grads: &network::Gradients,
    config: &AdamConfig,
) -> Result<()> {
    if state.layers.len() != net.n_layers()
        || grads.weights.len() != net.n_layers()
        || grads.biases.len() != net.n_layers()
    {
        return Err(Error::contract("optimizer state, gradients and network disagree on depth"));
    }
    for (i, layer) in net.layers_mut().iter_mut().enumerate() {
        if layer.frozen {
            continue;
        }
        if grads.weights[i].shape() != layer.weights.shape() {
            return Err(Error::contract(format!("gradient shape mismatch at layer {i}")));
        }
        let st = state.layers[i].get_or_insert_with(|| LayerMoments {
            weights: Moments::default(),
            bias: Moments::default(),
        });
        adam_update(
            layer.weights.as_mut_slice(),
            grads.weights[i].as_slice(),
            &mut st.weights,
            config,
        )?;
        adam_update(&mut layer.bias, &grads.biases[i], &mut st.bias, config)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Frozen,
    Unfrozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub phase: Phase,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    /// Wall-clock time of the optimization pass, excluding evaluation.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainRecord {
    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    pub fn total_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum()
    }

    /// Equality of everything except wall-clock times.
    pub fn same_metrics(&self, other: &TrainRecord) -> bool {
        self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.phase == b.phase
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.train_acc.to_bits() == b.train_acc.to_bits()
                    && a.test_loss.to_bits() == b.test_loss.to_bits()
                    && a.test_acc.to_bits() == b.test_acc.to_bits()
            })
    }
}

/// Optimization schedule for [`fit_network`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    /// Epochs during which layer 0 stays frozen.
    pub n_frozen: usize,
    pub n_total: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

/// Row order for one epoch; depends only on `(seed, epoch, rows)`.
pub fn epoch_order(seed: u64, epoch: usize, rows: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut rng::rng_for(&[rng::tag::SHUFFLE, seed, epoch as u64]));
    order
}

/// Train `net` in place with mini-batch Adam, evaluating after every epoch.
pub fn fit_network(
    net: &mut Mlp,
    train: (&Matrix, &[usize]),
    test: (&Matrix, &[usize]),
    schedule: &Schedule,
) -> Result<TrainRecord> {
    let (x, y) = train;
    if x.rows() == 0 || y.len() != x.rows() {
        return Err(Error::contract("training needs a nonempty split with one label per row"));
    }
    if x.cols() != net.input_dim() || test.0.cols() != net.input_dim() {
        return Err(Error::contract(format!(
            "network expects {} inputs, data has {}",
            net.input_dim(),
            x.cols()
        )));
    }
    if schedule.n_frozen > schedule.n_total || schedule.batch_size == 0 {
        return Err(Error::contract("inconsistent schedule"));
    }
    schedule.adam.validate()?;

    let mut state = AdamState::new(net);
    if schedule.n_frozen > 0 {
        net.set_frozen(0, true)?;
    }
    let mut record = TrainRecord::default();
    for epoch in 1..=schedule.n_total {
        if epoch == schedule.n_frozen + 1 && schedule.n_frozen > 0 {
            net.set_frozen(0, false)?;
        }
        let phase = if net.is_frozen(0) {
            Phase::Frozen
        } else {
            Phase::Unfrozen
        };
        let started = Instant::now();
        let order = epoch_order(schedule.seed, epoch, x.rows());
        for batch in order.chunks(schedule.batch_size) {
            let xb = x.select_rows(batch);
            let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let pass = net.forward(&xb)?;
            let (_, dlogits) = cross_entropy(pass.output(), &yb)?;
            let grads = net.backward(&pass, &dlogits)?;
            adam_step(&mut state, net, &grads, &schedule.adam)?;
        }
        let seconds = started.elapsed().as_secs_f64();
        let (train_loss, train_acc) = evaluate(net, x, y)?;
        let (test_loss, test_acc) = evaluate(net, test.0, test.1)?;
        record.epochs.push(EpochMetrics {
            epoch,
            phase,
            train_loss,
            train_acc,
            test_loss,
            test_acc,
            seconds,
        });
    }
    Ok(record)
}

/// Fit the PCA model a variant needs: on a row subset for `pcsinit_sub`,
/// on all training rows otherwise.
pub fn fit_pca(config: &TrainConfig, x: &Matrix) -> Result<PcaModel> {
    match config.variant {
        Variant::PcsInitSub { subset_fraction } => {
            pca::fit_subset(x, subset_fraction, config.seed, config.selection)
        }
        _ => pca::fit(x, config.selection),
    }
}

/// Layer specs for `config.variant`, with hidden width `r` from `model`.
///
/// Layer `ℓ` (1-based) of every variant is seeded with `ℓ`, so all variants
/// share the initial weights of layers 2 and up. `pca_nn` omits layer 1: the
/// projection plays its role.
pub fn architecture(config: &TrainConfig, model: &PcaModel, n_classes: usize) -> Vec<LayerSpec> {
    let (p, r) = (model.n_features(), model.n_components());
    let l = config.n_layers;
    let baseline = |seed: usize| config.baseline_initializer.initializer(seed as u64);
    let mut specs = Vec::with_capacity(l);
    match config.variant {
        Variant::PcsInit | Variant::PcsInitSub { .. } => specs.push(LayerSpec {
            in_dim: p,
            out_dim: r,
            activation: Activation::Identity,
            initializer: Initializer::PrincipalComponents(Box::new(model.clone())),
        }),
        Variant::PcsInitAct => specs.push(LayerSpec {
            in_dim: p,
            out_dim: r,
            activation: Activation::Relu,
            initializer: Initializer::PrincipalComponents(Box::new(model.clone())),
        }),
        Variant::PlainNn => specs.push(LayerSpec {
            in_dim: p,
            out_dim: r,
            activation: Activation::Relu,
            initializer: baseline(1),
        }),
        Variant::PcaNn => {}
    }
    for layer in 2..=l {
        let last = layer == l;
        specs.push(LayerSpec {
            in_dim: r,
            out_dim: if last { n_classes } else { r },
            activation: if last {
                Activation::Identity
            } else {
                Activation::Relu
            },
            initializer: baseline(layer),
        });
    }
    specs
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: TrainRecord,
    pub net: Mlp,
    pub pca: PcaModel,
    pub pca_fit_seconds: f64,
}

/// Fit PCA, build the variant's network and train it. Both splits must be
/// standardized; `pca_nn` projects them itself.
pub fn train(config: &TrainConfig, train: &Dataset, test: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if train.standardization.is_none() || test.standardization.is_none() {
        return Err(Error::contract("training expects standardized splits"));
    }
    if train.n_features() != test.n_features() {
        return Err(Error::contract("train and test feature counts differ"));
    }
    if train.n_classes < 2 {
        return Err(Error::contract("training needs at least 2 classes"));
    }
    let n_classes = train.n_classes.max(test.n_classes);
    if let Some(&bad) = test.labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::contract(format!("test label {bad} out of range")));
    }

    let started = Instant::now();
    let model = fit_pca(config, &train.features)?;
    let pca_fit_seconds = started.elapsed().as_secs_f64();

    let mut net = network::build(&architecture(config, &model, n_classes), config.seed)?;
    let schedule = Schedule {
        n_frozen: if config.variant.uses_pc_layer() {
            config.n_frozen
        } else {
            0
        },
        n_total: config.n_total,
        batch_size: config.resolved_batch_size(train.n_rows()),
        seed: config.seed,
        adam: config.adam(),
    };
    let record = if config.variant == Variant::PcaNn {
        let xtr = pca::project(&model, &train.features)?;
        let xte = pca::project(&model, &test.features)?;
        fit_network(&mut net, (&xtr, &train.labels), (&xte, &test.labels), &schedule)?
    } else {
        fit_network(
            &mut net,
            (&train.features, &train.labels),
            (&test.features, &test.labels),
            &schedule,
        )?
    };
    Ok(TrainOutcome {
        record,
        net,
        pca: model,
        pca_fit_seconds,
    })
}
