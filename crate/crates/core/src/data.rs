//! Tabular datasets: CSV ingestion, seeded splits with train-fitted
//! standardization, Gaussian noise injection and synthetic generators.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pca;
use crate::rng;

/// Column statistics used to standardize a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Fit on `x`: column means and sample standard deviations (`n - 1`),
    /// with scale 1 for constant columns.
    pub fn fit(x: &Matrix) -> Self {
        let (mean, scale, _) = pca::column_stats(x);
        Self { mean, scale }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::contract(format!(
                "standardization is for {} columns, got {}",
                self.mean.len(),
                x.cols()
            )));
        }
        Ok(pca::standardize_with(x, &self.mean, &self.scale))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub feature_names: Option<Vec<String>>,
    /// Original label strings, when labels were not integer-coded.
    pub class_names: Option<Vec<String>>,
    /// Set once the features have been standardized.
    pub standardization: Option<Standardization>,
    /// Row index of each sample in the source dataset.
    pub row_ids: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::contract(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::contract(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        let n = features.rows();
        Ok(Self {
            features,
            labels,
            n_classes,
            feature_names: None,
            class_names: None,
            standardization: None,
            row_ids: (0..n).collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            standardization: self.standardization.clone(),
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// `"last"`, a zero-based index, or a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(if s.eq_ignore_ascii_case("last") {
            LabelColumn::Last
        } else if let Ok(i) = s.parse() {
            LabelColumn::Index(i)
        } else {
            LabelColumn::Name(s.to_string())
        })
    }
}

/// Load a comma-delimited numeric CSV.
///
/// Labels that all parse as non-negative integers are used as class indices
/// directly; anything else is mapped to indices in order of first appearance.
pub fn load_csv(path: &Path, label_column: &LabelColumn, has_header: bool) -> Result<Dataset> {
    let file = File::open(path)?;
    read_csv(file, label_column, has_header)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    label_column: &LabelColumn,
    has_header: bool,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut label_idx: Option<usize> = None;
    let mut features = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut n_rows = 0usize;

    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse {
                line,
                column: rec.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        if w < 2 {
            return Err(Error::Parse {
                line,
                column: 1,
                message: "need at least one feature column and a label column".into(),
            });
        }
        if has_header && header.is_none() {
            header = Some(rec.iter().map(str::to_string).collect());
            continue;
        }
        let li = match label_idx {
            Some(i) => i,
            None => {
                let i = resolve_label(label_column, w, header.as_deref())
                    .map_err(|message| Error::Parse { line, column: 0, message })?;
                label_idx = Some(i);
                i
            }
        };
        for (j, field) in rec.iter().enumerate() {
            if j == li {
                raw_labels.push(field.to_string());
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                column: j + 1,
                message: format!("non-numeric feature value {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: j + 1,
                    message: format!("non-finite feature value {field:?}"),
                });
            }
            features.push(v);
        }
        n_rows += 1;
    }

    let (width, li) = match (width, label_idx) {
        (Some(w), Some(i)) if n_rows > 0 => (w, i),
        _ => {
            return Err(Error::Parse {
                line: 1,
                column: 0,
                message: "no data rows".into(),
            })
        }
    };

    let (labels, n_classes, class_names) = encode_labels(&raw_labels);
    let features = Matrix::new(n_rows, width - 1, features)?;
    let mut ds = Dataset::new(features, labels, n_classes)?;
    ds.class_names = class_names;
    ds.feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|&(j, _)| j != li)
            .map(|(_, s)| s)
            .collect()
    });
    Ok(ds)
}

fn resolve_label(
    col: &LabelColumn,
    width: usize,
    header: Option<&[String]>,
) -> std::result::Result<usize, String> {
    match col {
        LabelColumn::Last => Ok(width - 1),
        LabelColumn::Index(i) if *i < width => Ok(*i),
        LabelColumn::Index(i) => Err(format!("label column {i} out of range for {width} fields")),
        LabelColumn::Name(name) => header
            .ok_or_else(|| format!("label column {name:?} given by name but the file has no header"))?
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("no column named {name:?}")),
    }
}

fn encode_labels(raw: &[String]) -> (Vec<usize>, usize, Option<Vec<String>>) {
    let ints: Option<Vec<usize>> = raw.iter().map(|s| s.parse::<usize>().ok()).collect();
    if let Some(ints) = ints {
        let n_classes = ints.iter().max().map_or(0, |m| m + 1);
        return (ints, n_classes, None);
    }
    let mut names: Vec<String> = Vec::new();
    let labels = raw
        .iter()
        .map(|s| match names.iter().position(|n| n == s) {
            Some(i) => i,
            None => {
                names.push(s.clone());
                names.len() - 1
            }
        })
        .collect();
    (labels, names.len(), Some(names))
}

/// Write features then the label (as a class index) per row. Floats use the
/// shortest representation that parses back to the same bits.
pub fn write_csv<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if let Some(names) = &ds.feature_names {
        let mut h: Vec<&str> = names.iter().map(String::as_str).collect();
        h.push("label");
        wtr.write_record(&h).map_err(csv_io)?;
    }
    for i in 0..ds.n_rows() {
        let mut rec: Vec<String> = ds.features.row(i).iter().map(|v| format!("{v}")).collect();
        rec.push(ds.labels[i].to_string());
        wtr.write_record(&rec).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Seeded uniform split. Standardization is fitted on the train rows and
/// applied to both sides. The permutation depends only on `(seed, rows)`.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::contract(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = ds.n_rows();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::contract(format!(
            "a {train_fraction} split of {n} rows leaves one side empty"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::rng_for(&[rng::tag::SPLIT, seed]));
    let mut train = ds.subset(&perm[..n_train]);
    let mut test = ds.subset(&perm[n_train..]);

    let stdz = Standardization::fit(&train.features);
    train.features = stdz.apply(&train.features)?;
    test.features = stdz.apply(&test.features)?;
    train.standardization = Some(stdz.clone());
    test.standardization = Some(stdz);
    Ok((train, test))
}

/// Add i.i.d. `N(0, σ²)` noise to every feature of a standardized dataset.
pub fn add_gaussian_noise(ds: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if ds.standardization.is_none() {
        return Err(Error::contract("noise is injected after standardization"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::contract(format!("noise sigma {sigma} must be >= 0")));
    }
    let mut out = ds.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut g = rng::rng_for(&[rng::tag::NOISE, seed]);
    for v in out.features.as_mut_slice() {
        let z: f64 = StandardNormal.sample(&mut g);
        *v += sigma * z;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Class means on a sphere, isotropic within-class noise.
    GaussianBlobs,
    /// Class structure in a `rank`-dimensional subspace embedded in `p`
    /// dimensions, plus an isotropic noise floor.
    LowRankPlusNoise,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" | "gaussian_blobs" => Ok(SyntheticKind::GaussianBlobs),
            "low_rank" | "low_rank_plus_noise" => Ok(SyntheticKind::LowRankPlusNoise),
            other => Err(Error::contract(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// Radius of the sphere holding the class means.
    pub separation: f64,
    /// Standard deviation of the isotropic noise.
    pub noise_std: f64,
    /// Dimension of the informative subspace (low-rank kind only).
    pub rank: usize,
}

impl SyntheticKind {
    pub fn default_params(self) -> SyntheticParams {
        match self {
            SyntheticKind::GaussianBlobs => SyntheticParams {
                separation: 3.0,
                noise_std: 1.0,
                rank: 0,
            },
            SyntheticKind::LowRankPlusNoise => SyntheticParams {
                separation: 3.0,
                noise_std: 0.1,
                rank: 3,
            },
        }
    }
}

/// Generate a labeled synthetic dataset. Labels cycle through the classes so
/// every class has `⌊n / n_classes⌋` or one more rows.
pub fn make_synthetic(
    kind: SyntheticKind,
    n: usize,
    p: usize,
    n_classes: usize,
    params: SyntheticParams,
    seed: u64,
) -> Result<Dataset> {
    if n_classes < 2 || n < n_classes {
        return Err(Error::contract(format!(
            "need n >= n_classes >= 2, got n = {n}, n_classes = {n_classes}"
        )));
    }
    if p == 0 {
        return Err(Error::contract("need at least one feature"));
    }
    if !(params.noise_std >= 0.0) || !(params.separation >= 0.0) {
        return Err(Error::contract("separation and noise_std must be >= 0"));
    }
    let mut g = rng::rng_for(&[rng::tag::SYNTHETIC, seed]);
    let labels: Vec<usize> = (0..n).map(|i| i % n_classes).collect();

    let features = match kind {
        SyntheticKind::GaussianBlobs => {
            let means = sphere_points(n_classes, p, params.separation, &mut g);
            Matrix::from_fn(n, p, |i, j| {
                let z: f64 = StandardNormal.sample(&mut g);
                means.get(labels[i], j) + params.noise_std * z
            })
        }
        SyntheticKind::LowRankPlusNoise => {
            let k = params.rank;
            if k == 0 || k > p {
                return Err(Error::contract(format!("rank {k} outside [1, {p}]")));
            }
            let means = sphere_points(n_classes, k, params.separation, &mut g);
            let latent = Matrix::from_fn(n, k, |i, j| {
                let z: f64 = StandardNormal.sample(&mut g);
                means.get(labels[i], j) + z
            });
            // orthonormal rows scaled so each feature carries O(1) signal variance
            let (q, _) = linalg::qr(&Matrix::random_normal(p, k, &mut g))?;
            let mixing = q.transpose().scale((p as f64 / k as f64).sqrt());
            let mut x = latent.matmul(&mixing)?;
            for v in x.as_mut_slice() {
                let z: f64 = StandardNormal.sample(&mut g);
                *v += params.noise_std * z;
            }
            x
        }
    };
    Dataset::new(features, labels, n_classes)
}

fn sphere_points(count: usize, dim: usize, radius: f64, g: &mut rng::Rng) -> Matrix {
    let mut m = Matrix::random_normal(count, dim, g);
    for i in 0..count {
        let row = m.row_mut(i);
        let nrm = linalg::norm(row).max(f64::MIN_POSITIVE);
        row.iter_mut().for_each(|v| *v *= radius / nrm);
    }
    m
}
