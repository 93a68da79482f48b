//! Principal component analysis on standardized data.
//!
//! [`fit`] centers and scales every column (sample standard deviation,
//! divisor `n - 1`), takes the SVD of the result and keeps the leading
//! right singular vectors as the `p × r` loading matrix `W_r`.

use log::warn;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ComponentSelection {
    /// Smallest `r` whose cumulative explained-variance ratio reaches the fraction.
    VarianceThreshold(f64),
    /// Exactly `r` components.
    FixedCount(usize),
}

impl ComponentSelection {
    pub fn validate(&self, p: usize) -> Result<()> {
        match *self {
            ComponentSelection::VarianceThreshold(f) if !(f > 0.0 && f <= 1.0) => Err(
                Error::contract(format!("variance threshold {f} outside (0, 1]")),
            ),
            ComponentSelection::FixedCount(r) if r == 0 || r > p => Err(Error::contract(
                format!("fixed component count {r} outside [1, {p}]"),
            )),
            _ => Ok(()),
        }
    }
}

/// A fitted PCA. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// `p × r`, orthonormal columns.
    pub components: Matrix,
    /// Leading eigenvalues of `ZᵀZ` for the standardized fit matrix `Z`.
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub n_fitted: usize,
    /// Columns whose variance was zero; their scale was forced to 1.
    pub zero_variance_columns: Vec<usize>,
}

impl PcaModel {
    /// Assemble a model from explicit parts (used for hand-built projections).
    pub fn from_parts(
        components: Matrix,
        eigenvalues: Vec<f64>,
        explained_variance_ratio: Vec<f64>,
        mean: Vec<f64>,
        scale: Vec<f64>,
        n_fitted: usize,
    ) -> Result<Self> {
        let (p, r) = components.shape();
        if mean.len() != p || scale.len() != p {
            return Err(Error::contract("mean/scale length must equal component rows"));
        }
        if eigenvalues.len() != r || explained_variance_ratio.len() != r {
            return Err(Error::contract("eigenvalue vectors must have one entry per component"));
        }
        if scale.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::contract("scales must be positive"));
        }
        Ok(Self {
            components,
            eigenvalues,
            explained_variance_ratio,
            mean,
            scale,
            n_fitted,
            zero_variance_columns: Vec::new(),
        })
    }

    /// Number of input features `p`.
    pub fn n_features(&self) -> usize {
        self.components.rows()
    }

    /// Number of retained components `r`.
    pub fn n_components(&self) -> usize {
        self.components.cols()
    }
}

/// Index count selected by `selection` from descending explained-variance ratios.
pub fn select_rank(ratios: &[f64], selection: ComponentSelection) -> Result<usize> {
    selection.validate(ratios.len())?;
    Ok(match selection {
        ComponentSelection::FixedCount(r) => r,
        ComponentSelection::VarianceThreshold(f) => {
            let mut cum = 0.0;
            let mut r = ratios.len();
            for (i, v) in ratios.iter().enumerate() {
                cum += v;
                if cum >= f - 1e-12 {
                    r = i + 1;
                    break;
                }
            }
            r
        }
    })
}

/// Column means and sample standard deviations (divisor `n - 1`). Columns
/// with zero variance get scale 1; their indices are returned.
pub fn column_stats(x: &Matrix) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let (n, p) = x.shape();
    let mut mean = vec![0.0; p];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; p];
    for i in 0..n {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let denom = (n.max(2) - 1) as f64;
    let mut zero = Vec::new();
    let scale = var
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let sd = (s / denom).sqrt();
            if sd > 0.0 {
                sd
            } else {
                zero.push(j);
                1.0
            }
        })
        .collect();
    (mean, scale, zero)
}

/// `(x - mean) / scale` columnwise.
pub fn standardize_with(x: &Matrix, mean: &[f64], scale: &[f64]) -> Matrix {
    Matrix::from_fn(x.rows(), x.cols(), |i, j| (x.get(i, j) - mean[j]) / scale[j])
}

/// Fit PCA on all rows of `x`.
pub fn fit(x: &Matrix, selection: ComponentSelection) -> Result<PcaModel> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::contract(format!("PCA needs at least 2 rows, got {n}")));
    }
    selection.validate(p)?;
    let (mean, scale, zero) = column_stats(x);
    if !zero.is_empty() {
        warn!("PCA fit: {} zero-variance column(s) {:?}; scale set to 1", zero.len(), zero);
    }
    let z = standardize_with(x, &mean, &scale);
    let svd = linalg::svd(&z)?;
    let all_eigs: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let total: f64 = all_eigs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::contract("PCA input has zero total variance"));
    }
    let ratios: Vec<f64> = all_eigs.iter().map(|e| e / total).collect();
    let r = match selection {
        // the thin SVD only has min(n, p) directions
        ComponentSelection::FixedCount(r) if r > ratios.len() => {
            return Err(Error::contract(format!(
                "requested {r} components but only {} are available from {n} rows",
                ratios.len()
            )))
        }
        _ => select_rank(&ratios, selection)?,
    };
    let components = svd.vt.leading_rows(r).transpose();
    Ok(PcaModel {
        components,
        eigenvalues: all_eigs[..r].to_vec(),
        explained_variance_ratio: ratios[..r].to_vec(),
        mean,
        scale,
        n_fitted: n,
        zero_variance_columns: zero,
    })
}

/// Fit PCA on `⌈subset_fraction · rows⌉` rows drawn uniformly without
/// replacement. Sampled rows keep their original order, so a fraction of 1
/// reproduces [`fit`] exactly.
pub fn fit_subset(
    x: &Matrix,
    subset_fraction: f64,
    seed: u64,
    selection: ComponentSelection,
) -> Result<PcaModel> {
    if !(subset_fraction > 0.0 && subset_fraction <= 1.0) {
        return Err(Error::contract(format!(
            "subset fraction {subset_fraction} outside (0, 1]"
        )));
    }
    let n = x.rows();
    // the epsilon keeps e.g. 0.7 * 10 from rounding up to 8
    let k = ((subset_fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    if k < 2 {
        return Err(Error::contract(format!(
            "subset of {k} row(s) is too small for PCA"
        )));
    }
    let mut g = rng::rng_for(&[rng::tag::SUBSET, seed]);
    let mut rows = index::sample(&mut g, n, k).into_vec();
    rows.sort_unstable();
    fit(&x.select_rows(&rows), selection)
}

/// `((x - μ) / scale) · W_r`, an `n × r` matrix.
pub fn project(model: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != model.n_features() {
        return Err(Error::contract(format!(
            "projection input has {} columns, model expects {}",
            x.cols(),
            model.n_features()
        )));
    }
    standardize_with(x, &model.mean, &model.scale).matmul(&model.components)
}

/// The `p × r` loading matrix: entry `(j, k)` is the weight of feature `j` in
/// component `k`. This is the map used to redistribute component attributions
/// back onto features.
pub fn loading_matrix(model: &PcaModel) -> &Matrix {
    &model.components
}
