//! Shapley-value attributions.
//!
//! [`kernel_shap`] solves the Shapley-kernel weighted regression with the
//! efficiency constraint built in, either over every coalition (exact mode)
//! or over paired samples. [`exact_shapley`] enumerates the factorial formula
//! directly and serves as the reference. [`back_project`] spreads
//! principal-component attributions onto the original features through the
//! loading matrix; that map is not invertible when `r < p`, so the mismatch
//! is reported alongside the result.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pca::{self, PcaModel};
use crate::rng;

/// Largest feature count for which every coalition is enumerated.
pub const MAX_EXACT_FEATURES: usize = 15;

/// Rows per predict call when evaluating coalitions.
const PREDICT_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Feature,
    PrincipalComponent,
}

impl UnitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitKind::Feature => "feature",
            UnitKind::PrincipalComponent => "principal_component",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Direct,
    BackProjected,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Direct => "direct",
            Provenance::BackProjected => "back_projected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// `values[class][unit]`.
    pub values: Vec<Vec<f64>>,
    /// Mean model output over the background, per class.
    pub base_value: Vec<f64>,
    /// Model output at the explained point, per class.
    pub output: Vec<f64>,
    pub unit_kind: UnitKind,
    pub provenance: Provenance,
    /// Direct: `|base + Σ values − output|`. Back-projected:
    /// `|Σ feature values − Σ component values|`.
    pub residual: Vec<f64>,
    /// Every coalition was evaluated.
    pub exact: bool,
    /// Ridge added to the regression system (0 when none was needed).
    pub regularization: f64,
    /// The system was singular and the ridge had to be raised.
    pub regularization_increased: bool,
}

impl Attribution {
    pub fn n_classes(&self) -> usize {
        self.values.len()
    }

    pub fn n_units(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Relabel the explained units, e.g. when the predictor's inputs were
    /// principal-component scores.
    pub fn with_unit_kind(mut self, kind: UnitKind) -> Self {
        self.unit_kind = kind;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapConfig {
    pub background: Matrix,
    /// 0 requests exact enumeration.
    pub n_coalitions: usize,
    pub seed: u64,
    /// Relative ridge used when the regression system is singular.
    pub regularization: f64,
}

impl ShapConfig {
    pub fn exact(background: Matrix) -> Self {
        Self {
            background,
            n_coalitions: 0,
            seed: 0,
            regularization: 1e-8,
        }
    }

    pub fn sampled(background: Matrix, n_coalitions: usize, seed: u64) -> Self {
        Self {
            background,
            n_coalitions,
            seed,
            regularization: 1e-8,
        }
    }
}

/// Up to `size` rows of `x` drawn without replacement (all rows if fewer),
/// kept in their original order.
pub fn sample_background(x: &Matrix, size: usize, seed: u64) -> Matrix {
    if x.rows() <= size {
        return x.clone();
    }
    let mut g = rng::rng_for(&[rng::tag::BACKGROUND, seed]);
    let mut rows = index::sample(&mut g, x.rows(), size).into_vec();
    rows.sort_unstable();
    x.select_rows(&rows)
}

/// Mean prediction over the background with the features in each mask taken
/// from `x`. Returns `values[mask][class]`.
fn coalition_values<F>(predict: &F, x: &[f64], background: &Matrix, masks: &[Vec<bool>]) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&Matrix) -> Result<Matrix>,
{
    let nb = background.rows();
    let per_chunk = (PREDICT_CHUNK / nb).max(1);
    let mut out = Vec::with_capacity(masks.len());
    for chunk in masks.chunks(per_chunk) {
        let mut data = Vec::with_capacity(chunk.len() * nb * x.len());
        for mask in chunk {
            for b in 0..nb {
                let brow = background.row(b);
                data.extend(mask.iter().enumerate().map(|(j, &on)| if on { x[j] } else { brow[j] }));
            }
        }
        let inputs = Matrix::new(chunk.len() * nb, x.len(), data)?;
        let preds = predict(&inputs)?;
        if preds.rows() != inputs.rows() {
            return Err(Error::contract("predict returned the wrong number of rows"));
        }
        for c in 0..chunk.len() {
            let mut mean = vec![0.0; preds.cols()];
            for b in 0..nb {
                for (m, v) in mean.iter_mut().zip(preds.row(c * nb + b)) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nb as f64);
            out.push(mean);
        }
    }
    Ok(out)
}

fn shapley_kernel(m: usize, s: usize) -> f64 {
    (m - 1) as f64 / (binomial(m, s) * (s * (m - s)) as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coalitions with their regression weights, excluding the empty and full
/// coalitions (those enter as constraints).
fn coalitions(m: usize, n_coalitions: usize, seed: u64) -> Vec<(Vec<bool>, f64)> {
    if n_coalitions == 0 {
        return (1..(1u64 << m) - 1)
            .map(|bits| {
                let mask: Vec<bool> = (0..m).map(|j| bits >> j & 1 == 1).collect();
                let s = bits.count_ones() as usize;
                (mask, shapley_kernel(m, s))
            })
            .collect();
    }
    // coalition sizes drawn in proportion to the kernel mass of each size,
    // members uniform within a size; each draw is paired with its complement
    let size_mass: Vec<f64> = (1..m).map(|s| (m - 1) as f64 / (s * (m - s)) as f64).collect();
    let total: f64 = size_mass.iter().sum();
    let mut g = rng::rng_for(&[rng::tag::SHAP, seed]);
    let mut counts: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    for _ in 0..n_coalitions.div_ceil(2) {
        let mut u = g.random::<f64>() * total;
        let mut s = m - 1;
        for (i, w) in size_mass.iter().enumerate() {
            if u < *w {
                s = i + 1;
                break;
            }
            u -= w;
        }
        let mut mask = vec![false; m];
        for j in index::sample(&mut g, m, s) {
            mask[j] = true;
        }
        let complement: Vec<bool> = mask.iter().map(|b| !b).collect();
        *counts.entry(mask).or_default() += 1.0;
        *counts.entry(complement).or_default() += 1.0;
    }
    counts.into_iter().collect()
}

/// Kernel SHAP attribution of `predict` at `x`.
///
/// Masked features are filled from each background row and the predictions
/// averaged. The efficiency constraint `Σ φ = f(x) − base` is enforced by
/// eliminating the last feature, so it holds for any coalition sample.
pub fn kernel_shap<F>(predict: F, x: &[f64], config: &ShapConfig) -> Result<Attribution>
where
    F: Fn(&Matrix) -> Result<Matrix>,
{
    let m = x.len();
    let bg = &config.background;
    if bg.rows() == 0 {
        return Err(Error::contract("background must have at least one row"));
    }
    if m == 0 || bg.cols() != m {
        return Err(Error::contract(format!(
            "point has {m} features, background has {}",
            bg.cols()
        )));
    }
    let exact = config.n_coalitions == 0;
    if exact && m > MAX_EXACT_FEATURES {
        return Err(Error::contract(format!(
            "exact enumeration is limited to {MAX_EXACT_FEATURES} features, got {m}"
        )));
    }
    if !(config.regularization >= 0.0) {
        return Err(Error::contract("regularization must be >= 0"));
    }

    let ends = coalition_values(&predict, x, bg, &[vec![false; m], vec![true; m]])?;
    let (base, output) = (ends[0].clone(), ends[1].clone());
    let n_classes = base.len();

    let mut result = Attribution {
        values: Vec::with_capacity(n_classes),
        base_value: base.clone(),
        output: output.clone(),
        unit_kind: UnitKind::Feature,
        provenance: Provenance::Direct,
        residual: vec![0.0; n_classes],
        exact,
        regularization: 0.0,
        regularization_increased: false,
    };
    if m == 1 {
        result.values = (0..n_classes).map(|c| vec![output[c] - base[c]]).collect();
        return Ok(result);
    }

    let sample = coalitions(m, config.n_coalitions, config.seed);
    let masks: Vec<Vec<bool>> = sample.iter().map(|(z, _)| z.clone()).collect();
    let vals = coalition_values(&predict, x, bg, &masks)?;

    // reduced design: a_z[j] = z_j − z_last, j < m − 1
    let k = m - 1;
    let mut gram = Matrix::zeros(k, k);
    let design: Vec<Vec<f64>> = masks
        .iter()
        .map(|z| {
            let last = z[k] as u8 as f64;
            (0..k).map(|j| z[j] as u8 as f64 - last).collect()
        })
        .collect();
    for (a, (_, w)) in design.iter().zip(&sample) {
        for i in 0..k {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..k {
                gram.set(i, j, gram.get(i, j) + w * a[i] * a[j]);
            }
        }
    }
    let solver = RidgeSolver::new(&gram, config.regularization)?;
    result.regularization = solver.ridge;
    result.regularization_increased = solver.increased;

    for c in 0..n_classes {
        let delta = output[c] - base[c];
        let mut rhs = vec![0.0; k];
        for ((a, (z, w)), v) in design.iter().zip(&sample).zip(&vals) {
            let t = v[c] - base[c] - if z[k] { delta } else { 0.0 };
            for j in 0..k {
                rhs[j] += w * a[j] * t;
            }
        }
        let mut phi = solver.solve(&rhs);
        let last = delta - phi.iter().sum::<f64>();
        phi.push(last);
        result.residual[c] = (base[c] + phi.iter().sum::<f64>() - output[c]).abs();
        result.values.push(phi);
    }
    Ok(result)
}

/// Symmetric solve through an eigendecomposition, adding a ridge only when
/// the system is numerically singular.
struct RidgeSolver {
    eig: linalg::EigResult,
    ridge: f64,
    increased: bool,
}

impl RidgeSolver {
    const MAX_CONDITION: f64 = 1e12;

    fn new(gram: &Matrix, regularization: f64) -> Result<Self> {
        let eig = linalg::sym_eig(gram)?;
        let top = eig.eigenvalues.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        let low = eig.eigenvalues.last().copied().unwrap_or(0.0);
        let mut ridge = 0.0;
        let mut increased = false;
        if low <= top / Self::MAX_CONDITION {
            let mut rel = regularization.max(1e-12);
            while low + rel * top <= (top + rel * top) / Self::MAX_CONDITION {
                rel *= 10.0;
            }
            ridge = rel * top;
            increased = true;
            log::warn!("kernel SHAP regression is singular; ridge raised to {ridge:e}");
        }
        Ok(Self { eig, ridge, increased })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let v = &self.eig.eigenvectors;
        let n = rhs.len();
        let mut out = vec![0.0; n];
        for (i, lambda) in self.eig.eigenvalues.iter().enumerate() {
            let proj: f64 = (0..n).map(|r| v.get(r, i) * rhs[r]).sum();
            let coef = proj / (lambda + self.ridge);
            for (r, o) in out.iter_mut().enumerate() {
                *o += coef * v.get(r, i);
            }
        }
        out
    }
}

/// Shapley values for one class by direct enumeration of all `2^M`
/// coalitions with weights `|S|! (M − |S| − 1)! / M!`.
pub fn exact_shapley<F>(predict: F, x: &[f64], background: &Matrix, class_index: usize) -> Result<Vec<f64>>
where
    F: Fn(&Matrix) -> Result<Matrix>,
{
    let m = x.len();
    if m == 0 || m > MAX_EXACT_FEATURES {
        return Err(Error::contract(format!(
            "exact Shapley needs 1..={MAX_EXACT_FEATURES} features, got {m}"
        )));
    }
    if background.rows() == 0 || background.cols() != m {
        return Err(Error::contract("background must be nonempty with matching columns"));
    }
    let n_sets = 1usize << m;
    let nb = background.rows();
    let mut value = vec![0.0; n_sets];
    let sets_per_call = (PREDICT_CHUNK / nb).max(1);
    let mut start = 0;
    while start < n_sets {
        let end = (start + sets_per_call).min(n_sets);
        let inputs = Matrix::from_fn((end - start) * nb, m, |row, j| {
            let set = start + row / nb;
            if set & (1 << j) != 0 {
                x[j]
            } else {
                background.get(row % nb, j)
            }
        });
        let preds = predict(&inputs)?;
        if class_index >= preds.cols() {
            return Err(Error::contract(format!(
                "class {class_index} out of range for {} outputs",
                preds.cols()
            )));
        }
        for set in start..end {
            let rows = (set - start) * nb..(set - start + 1) * nb;
            value[set] = rows.map(|r| preds.get(r, class_index)).sum::<f64>() / nb as f64;
        }
        start = end;
    }
    let fact: Vec<f64> = (0..=m).scan(1.0, |acc, i| {
        if i > 0 {
            *acc *= i as f64;
        }
        Some(*acc)
    })
    .collect();
    let weight: Vec<f64> = (0..m).map(|s| fact[s] * fact[m - s - 1] / fact[m]).collect();
    Ok((0..m)
        .map(|j| {
            (0..n_sets)
                .filter(|set| set & (1 << j) == 0)
                .map(|set| weight[set.count_ones() as usize] * (value[set | 1 << j] - value[set]))
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackProjection {
    /// Feature-level attribution, provenance `back_projected`.
    pub attribution: Attribution,
    /// Per class, the signed `p × r` map `L[j, k] · φ_k`.
    pub contributions: Vec<Matrix>,
}

/// Redistribute component attributions onto features: feature `j` receives
/// `Σ_k L[j, k] · φ_k`. This is an approximation; the per-class gap between
/// feature and component totals is stored in `residual`.
pub fn back_project(pc_attribution: &Attribution, model: &PcaModel) -> Result<BackProjection> {
    if pc_attribution.unit_kind != UnitKind::PrincipalComponent {
        return Err(Error::contract("back-projection needs a principal-component attribution"));
    }
    let l = pca::loading_matrix(model);
    let (p, r) = l.shape();
    if pc_attribution.n_units() != r {
        return Err(Error::contract(format!(
            "attribution has {} components, model has {r}",
            pc_attribution.n_units()
        )));
    }
    let mut values = Vec::with_capacity(pc_attribution.n_classes());
    let mut contributions = Vec::with_capacity(pc_attribution.n_classes());
    let mut residual = Vec::with_capacity(pc_attribution.n_classes());
    for phi in &pc_attribution.values {
        if phi.len() != r {
            return Err(Error::contract("ragged component attribution"));
        }
        let map = Matrix::from_fn(p, r, |j, k| l.get(j, k) * phi[k]);
        let feat: Vec<f64> = (0..p).map(|j| map.row(j).iter().sum()).collect();
        residual.push((feat.iter().sum::<f64>() - phi.iter().sum::<f64>()).abs());
        values.push(feat);
        contributions.push(map);
    }
    Ok(BackProjection {
        attribution: Attribution {
            values,
            base_value: pc_attribution.base_value.clone(),
            output: pc_attribution.output.clone(),
            unit_kind: UnitKind::Feature,
            provenance: Provenance::BackProjected,
            residual,
            exact: pc_attribution.exact,
            regularization: pc_attribution.regularization,
            regularization_increased: pc_attribution.regularization_increased,
        },
        contributions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub unit_kind: UnitKind,
    /// Per class, `(unit_index, mean |value|)` sorted by decreasing importance.
    pub per_class: Vec<Vec<(usize, f64)>>,
}

/// Mean absolute attribution per unit and class over several points.
pub fn global_importance(attributions: &[Attribution]) -> Result<GlobalImportance> {
    let first = attributions
        .first()
        .ok_or_else(|| Error::contract("global importance of an empty list"))?;
    let (kind, nc, nu) = (first.unit_kind, first.n_classes(), first.n_units());
    if attributions
        .iter()
        .any(|a| a.unit_kind != kind || a.n_classes() != nc || a.values.iter().any(|v| v.len() != nu))
    {
        return Err(Error::contract("attributions differ in unit kind or shape"));
    }
    let n = attributions.len() as f64;
    let per_class = (0..nc)
        .map(|c| {
            let mut ranked: Vec<(usize, f64)> = (0..nu)
                .map(|u| (u, attributions.iter().map(|a| a.values[c][u].abs()).sum::<f64>() / n))
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked
        })
        .collect();
    Ok(GlobalImportance {
        unit_kind: kind,
        per_class,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Columns `unit_index, unit_kind, class, value, base_value, provenance`.
pub fn write_attribution_csv<W: Write>(attr: &Attribution, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["unit_index", "unit_kind", "class", "value", "base_value", "provenance"])
        .map_err(csv_err)?;
    for (c, vals) in attr.values.iter().enumerate() {
        for (u, v) in vals.iter().enumerate() {
            wtr.write_record([
                u.to_string(),
                attr.unit_kind.as_str().to_string(),
                c.to_string(),
                v.to_string(),
                attr.base_value[c].to_string(),
                attr.provenance.as_str().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Columns `feature_index, component_index, contribution` with the magnitude
/// `|L[j, k] · φ_k|`; no normalization is applied.
pub fn write_heatmap_csv<W: Write>(contributions: &Matrix, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["feature_index", "component_index", "contribution"])
        .map_err(csv_err)?;
    for j in 0..contributions.rows() {
        for k in 0..contributions.cols() {
            wtr.write_record([j.to_string(), k.to_string(), contributions.get(j, k).abs().to_string()])
                .map_err(csv_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Columns `class, rank, unit_index, unit_kind, mean_abs_value`.
pub fn write_global_importance_csv<W: Write>(gi: &GlobalImportance, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["class", "rank", "unit_index", "unit_kind", "mean_abs_value"])
        .map_err(csv_err)?;
    for (c, ranked) in gi.per_class.iter().enumerate() {
        for (rank, (u, v)) in ranked.iter().enumerate() {
            wtr.write_record([
                c.to_string(),
                (rank + 1).to_string(),
                u.to_string(),
                gi.unit_kind.as_str().to_string(),
                v.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear(w: Vec<f64>) -> impl Fn(&Matrix) -> Result<Matrix> {
        move |x: &Matrix| {
            let y = x.matvec(&w)?;
            Matrix::new(y.len(), 1, y)
        }
    }

    #[test]
    fn linear_model_closed_form() {
        let w = vec![1.5, -2.0, 0.5, 3.0];
        let x = [1.0, 2.0, -1.0, 0.5];
        let b = [0.2, -0.3, 0.7, 1.0];
        let bg = Matrix::new(1, 4, b.to_vec()).unwrap();
        let attr = kernel_shap(linear(w.clone()), &x, &ShapConfig::exact(bg)).unwrap();
        for j in 0..4 {
            assert_relative_eq!(attr.values[0][j], w[j] * (x[j] - b[j]), epsilon = 1e-10);
        }
        assert!(attr.exact && !attr.regularization_increased);
    }

    #[test]
    fn symmetry_and_dummy() {
        // features 1 and 2 enter symmetrically, feature 3 is ignored
        let f = |x: &Matrix| {
            Ok(Matrix::from_fn(x.rows(), 1, |i, _| {
                let r = x.row(i);
                (r[1] + r[2]).tanh() * r[0] + r[1] * r[2]
            }))
        };
        let x = [0.3, 1.2, 1.2, -4.0];
        let bg = Matrix::from_rows(&[vec![0.0, 0.1, 0.1, 1.0], vec![1.0, -0.5, -0.5, 2.0]]).unwrap();
        let attr = kernel_shap(f, &x, &ShapConfig::exact(bg)).unwrap();
        let v = &attr.values[0];
        assert!((v[1] - v[2]).abs() <= 1e-8);
        assert!(v[3].abs() <= 1e-8);
        assert!(attr.residual[0] <= 1e-6);
    }

    #[test]
    fn single_feature() {
        let bg = Matrix::new(2, 1, vec![0.0, 2.0]).unwrap();
        let sq = |x: &Matrix| Ok(Matrix::from_fn(x.rows(), 1, |i, _| x.get(i, 0).powi(2)));
        let exact = exact_shapley(sq, &[3.0], &bg, 0).unwrap();
        assert_relative_eq!(exact[0], 9.0 - 2.0, epsilon = 1e-12);
        let attr = kernel_shap(sq, &[3.0], &ShapConfig::exact(bg)).unwrap();
        assert_relative_eq!(attr.values[0][0], 7.0, epsilon = 1e-12);
    }

    #[test]
    fn additive_model_enumeration() {
        let f = |x: &Matrix| {
            Ok(Matrix::from_fn(x.rows(), 1, |i, _| {
                let r = x.row(i);
                r[0].sin() + r[1].powi(3) + 2.0 * r[2]
            }))
        };
        let x = [0.4, -1.0, 2.0];
        let bg = Matrix::new(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        let v = exact_shapley(f, &x, &bg, 0).unwrap();
        assert_relative_eq!(v[0], 0.4f64.sin(), epsilon = 1e-12);
        assert_relative_eq!(v[1], -1.0 - 0.125, epsilon = 1e-12);
        assert_relative_eq!(v[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_mode_limits() {
        let bg = Matrix::zeros(1, 16);
        let f = |x: &Matrix| Ok(Matrix::zeros(x.rows(), 1));
        assert!(kernel_shap(f, &[0.0; 16], &ShapConfig::exact(bg.clone())).is_err());
        assert!(exact_shapley(f, &[0.0; 16], &bg, 0).is_err());
        assert!(kernel_shap(f, &[0.0; 3], &ShapConfig::exact(Matrix::zeros(0, 3))).is_err());
    }

    fn pc_attr(values: Vec<Vec<f64>>) -> Attribution {
        let n = values.len();
        Attribution {
            values,
            base_value: vec![0.0; n],
            output: vec![0.0; n],
            unit_kind: UnitKind::PrincipalComponent,
            provenance: Provenance::Direct,
            residual: vec![0.0; n],
            exact: true,
            regularization: 0.0,
            regularization_increased: false,
        }
    }

    fn model_with(components: Matrix) -> PcaModel {
        let (p, r) = components.shape();
        PcaModel::from_parts(components, vec![1.0; r], vec![1.0 / r as f64; r], vec![0.0; p], vec![1.0; p], 10).unwrap()
    }

    #[test]
    fn back_projection_arithmetic() {
        let s = 0.5f64.sqrt();
        let model = model_with(Matrix::new(2, 1, vec![s, s]).unwrap());
        let bp = back_project(&pc_attr(vec![vec![2.0]]), &model).unwrap();
        assert_relative_eq!(bp.attribution.values[0][0], 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(bp.attribution.values[0][1], 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(bp.attribution.provenance, Provenance::BackProjected);
        assert!(bp.attribution.residual[0] > 0.5);
        let zero = back_project(&pc_attr(vec![vec![0.0]]), &model).unwrap();
        assert!(zero.attribution.values[0].iter().all(|&v| v == 0.0));
        assert!(back_project(&pc_attr(vec![vec![1.0, 2.0]]), &model).is_err());
    }

    #[test]
    fn global_importance_basics() {
        let mut a = pc_attr(vec![vec![0.5, -2.0, 1.0]]);
        let gi = global_importance(std::slice::from_ref(&a)).unwrap();
        assert_eq!(gi.per_class[0], vec![(1, 2.0), (2, 1.0), (0, 0.5)]);
        let mut b = a.clone();
        b.values[0].iter_mut().for_each(|v| *v = -*v);
        let gi = global_importance(&[a.clone(), b]).unwrap();
        assert_eq!(gi.per_class[0][0], (1, 2.0));
        assert!(global_importance(&[]).is_err());
        a.unit_kind = UnitKind::Feature;
        assert!(global_importance(&[a, pc_attr(vec![vec![0.0; 3]])]).is_err());
    }

    #[test]
    fn csv_exports() {
        let attr = pc_attr(vec![vec![1.0, -2.0], vec![0.5, 0.25]]);
        let mut buf = Vec::new();
        write_attribution_csv(&attr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "unit_index,unit_kind,class,value,base_value,provenance");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "1,principal_component,0,-2,0,direct");
        let mut buf = Vec::new();
        write_heatmap_csv(&Matrix::new(1, 2, vec![-3.0, 1.0]).unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "feature_index,component_index,contribution\n0,0,3\n0,1,1\n");
    }
}
