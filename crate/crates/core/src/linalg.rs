//! Dense real linear algebra.
//!
//! A row-major [`Matrix`] plus the factorizations the rest of the crate is
//! built on: a one-sided Jacobi SVD, a cyclic Jacobi symmetric eigensolver,
//! power-iteration spectral norm, condition numbers, a Gram-Schmidt QR and a
//! Cholesky solve.
//!
//! All routines are deterministic for a fixed input. Singular vectors and
//! eigenvectors follow one sign convention: the first component whose
//! magnitude exceeds [`SIGN_TOL`] is positive.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Components smaller than this are skipped when fixing vector signs.
pub const SIGN_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense matrix, `data[i * cols + j]` holds entry `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Build from row-major data. Rejects a length mismatch and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::contract(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Matrix with i.i.d. standard normal entries.
    pub fn random_normal(rows: usize, cols: usize, rng: &mut rng::Rng) -> Self {
        Self::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::contract(format!(
                "matmul: {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(n, m);
        for i in 0..n {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out.data[i * m..(i + 1) * m];
            for (l, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[l * m..(l + 1) * m];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::contract(format!(
                "matmul_t: {}x{} by ({}x{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::contract(format!(
                "t_matmul: ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, p, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(p, m);
        for l in 0..n {
            let a_row = self.row(l);
            let b_row = other.row(l);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = &mut out.data[i * m..(i + 1) * m];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `self · v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::contract(format!(
                "matvec: {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ · v`.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::contract(format!(
                "t_matvec: ({}x{})ᵀ by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::contract(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest absolute entrywise difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// The first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        assert!(k <= self.cols);
        Matrix::from_fn(self.rows, k, |i, j| self.get(i, j))
    }

    /// The first `k` rows.
    pub fn leading_rows(&self, k: usize) -> Matrix {
        assert!(k <= self.rows);
        Matrix {
            rows: k,
            cols: self.cols,
            data: self.data[..k * self.cols].to_vec(),
        }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest `|a_ij - a_ji|`, or `None` for a non-square matrix.
    pub fn asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        Some(worst)
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

pub fn transpose(a: &Matrix) -> Matrix {
    a.transpose()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thin singular value decomposition `a = u · diag(s) · vt`.
///
/// With `k = min(rows, cols)`: `u` is `rows × k`, `vt` is `k × cols`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub vt: Matrix,
}

impl SvdResult {
    /// `u · diag(s) · vt`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.singular_values) {
                *v *= s;
            }
        }
        us.matmul(&self.vt).expect("svd factors chain")
    }
}

/// Eigenpairs of a symmetric matrix; `eigenvectors` holds them as columns.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::contract("svd of an empty matrix"));
    }
    let mut res = if a.rows() >= a.cols() {
        svd_tall(a)?
    } else {
        // aᵀ = U S Vᵀ  =>  a = V S Uᵀ
        let t = svd_tall(&a.transpose())?;
        SvdResult {
            u: t.vt.transpose(),
            singular_values: t.singular_values,
            vt: t.u.transpose(),
        }
    };
    for i in 0..res.vt.rows() {
        if first_significant(res.vt.row(i)) < 0.0 {
            res.vt.row_mut(i).iter_mut().for_each(|v| *v = -*v);
            for r in 0..res.u.rows() {
                let v = res.u.get(r, i);
                res.u.set(r, i, -v);
            }
        }
    }
    Ok(res)
}

fn first_significant(v: &[f64]) -> f64 {
    v.iter().copied().find(|x| x.abs() > SIGN_TOL).unwrap_or(0.0)
}

/// SVD for `rows >= cols`, orthogonalizing columns in place.
fn svd_tall(a: &Matrix) -> Result<SvdResult> {
    let (n, p) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..p).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            e
        })
        .collect();

    let eps = f64::EPSILON;
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (ci, cj) = pair_mut(&mut cols, i, j);
                rotate(ci, cj, c, s);
                let (vi, vj) = pair_mut(&mut v, i, j);
                rotate(vi, vj, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "one-sided Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let sigma_max = norms[order[0]];
    let zero_tol = sigma_max * 1e-13 * (n.max(p) as f64);

    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(p);
    let mut singular_values = Vec::with_capacity(p);
    for &k in &order {
        let s = norms[k];
        singular_values.push(s);
        if s > zero_tol && s > 0.0 {
            u_cols.push(Some(cols[k].iter().map(|x| x / s).collect()));
        } else {
            u_cols.push(None);
        }
    }
    complete_orthonormal(&mut u_cols, n);

    let mut u = Matrix::zeros(n, p);
    for (j, col) in u_cols.iter().enumerate() {
        for (i, &x) in col.as_ref().expect("completed").iter().enumerate() {
            u.set(i, j, x);
        }
    }
    let mut vt = Matrix::zeros(p, p);
    for (r, &k) in order.iter().enumerate() {
        vt.row_mut(r).copy_from_slice(&v[k]);
    }
    Ok(SvdResult {
        u,
        singular_values,
        vt,
    })
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    debug_assert!(i < j);
    let (lo, hi) = v.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fill `None` slots with unit vectors orthogonal to every other slot.
fn complete_orthonormal(cols: &mut [Option<Vec<f64>>], dim: usize) {
    let mut candidate = 0usize;
    for slot in 0..cols.len() {
        if cols[slot].is_some() {
            continue;
        }
        loop {
            assert!(candidate < dim, "cannot complete orthonormal basis");
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            // two passes of Gram-Schmidt
            for _ in 0..2 {
                for other in cols.iter().flatten() {
                    let d = dot(&e, other);
                    e.iter_mut().zip(other).for_each(|(a, b)| *a -= d * b);
                }
            }
            let nrm = norm(&e);
            if nrm > 0.5 {
                e.iter_mut().for_each(|x| *x /= nrm);
                cols[slot] = Some(e);
                break;
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Symmetry is checked relative to the largest entry:
/// `|a_ij - a_ji| <= 1e-10 * max(1, max|a|)`.
pub fn sym_eig(a: &Matrix) -> Result<EigResult> {
    check_symmetric(a)?;
    let n = a.rows();
    if n == 0 {
        return Err(Error::contract("sym_eig of an empty matrix"));
    }
    // work on the symmetrized copy
    let mut m = Matrix::from_fn(n, n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)));
    // rows of `vt` are the eigenvectors, so rotations touch contiguous memory
    let mut vt = Matrix::identity(n);
    let eps = f64::EPSILON;
    // off-diagonal entries this small cannot move any eigenvalue by more than
    // a rounding error of the largest one
    let floor = eps * 1e-2 * m.frobenius_norm() / n as f64;

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                if apq.abs() <= floor || apq.abs() <= eps * (app.abs() * aqq.abs()).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // m <- Jᵀ m J, using symmetry: rotate rows p and q, mirror into columns
                {
                    let data = m.as_mut_slice();
                    let (lo, hi) = data.split_at_mut(q * n);
                    let rp = &mut lo[p * n..(p + 1) * n];
                    let rq = &mut hi[..n];
                    rotate(rp, rq, c, s);
                }
                m.set(p, p, app - t * apq);
                m.set(q, q, aqq + t * apq);
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for k in 0..n {
                    if k != p && k != q {
                        let (vp, vq) = (m.get(p, k), m.get(q, k));
                        m.set(k, p, vp);
                        m.set(k, q, vq);
                    }
                }
                let data = vt.as_mut_slice();
                let (lo, hi) = data.split_at_mut(q * n);
                rotate(&mut lo[p * n..(p + 1) * n], &mut hi[..n], c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| diag[y].total_cmp(&diag[x]).then(x.cmp(&y)));
    let eigenvalues = order.iter().map(|&k| diag[k]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        let mut col = vt.row(k).to_vec();
        if first_significant(&col) < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        for (r, x) in col.into_iter().enumerate() {
            eigenvectors.set(r, c, x);
        }
    }
    Ok(EigResult {
        eigenvalues,
        eigenvectors,
    })
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    match a.asymmetry() {
        None => Err(Error::contract(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        ))),
        Some(d) if d > 1e-10 * a.max_abs().max(1.0) => Err(Error::contract(format!(
            "matrix is not symmetric (max |a_ij - a_ji| = {d:e})"
        ))),
        Some(_) => Ok(()),
    }
}

/// Largest singular value by power iteration on `aᵀa` (or `aaᵀ`, whichever is
/// smaller).
///
/// Iteration starts from the normalized all-ones vector and stops once the
/// residual `‖Bv − μv‖` guarantees `|σ − √μ| ≤ tol`. A second run from a
/// seeded Gaussian start guards against the all-ones vector being orthogonal
/// to the dominant direction; the larger estimate wins.
pub fn spectral_norm(a: &Matrix, tol: f64, max_iter: usize) -> f64 {
    assert!(tol > 0.0, "spectral_norm: tol must be positive");
    if a.rows() == 0 || a.cols() == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    let dim = a.rows().min(a.cols());
    let ones = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut best = power_iterate(a, ones, tol, max_iter);

    let mut g = rng::rng_for(&[rng::tag::POWER_ITERATION, a.rows() as u64, a.cols() as u64]);
    let start: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut g)).collect();
    best = best.max(power_iterate(a, start, tol, max_iter));
    best.max(0.0).sqrt()
}

/// Returns the Rayleigh quotient of the Gram operator at convergence.
fn power_iterate(a: &Matrix, mut v: Vec<f64>, tol: f64, max_iter: usize) -> f64 {
    let wide = a.rows() < a.cols();
    let apply = |x: &[f64]| -> Vec<f64> {
        if wide {
            // a aᵀ x
            let y = a.t_matvec(x).expect("dims");
            a.matvec(&y).expect("dims")
        } else {
            let y = a.matvec(x).expect("dims");
            a.t_matvec(&y).expect("dims")
        }
    };
    let nrm = norm(&v);
    if nrm == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nrm);
    let mut mu = 0.0;
    for _ in 0..max_iter.max(1) {
        let w = apply(&v);
        mu = dot(&v, &w);
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - mu * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let wn = norm(&w);
        if wn == 0.0 {
            return 0.0;
        }
        if residual <= 2.0 * tol * mu.max(0.0).sqrt() {
            break;
        }
        v = w.into_iter().map(|x| x / wn).collect();
    }
    mu
}

/// `λ_max / λ_min⁺` of a symmetric positive semidefinite matrix.
///
/// `λ_min⁺` is the smallest eigenvalue above `λ_max · 1e-12 · max(rows, cols)`.
/// Returns `f64::INFINITY` when no eigenvalue is positive.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    let eig = sym_eig(a)?;
    Ok(condition_from_eigenvalues(
        &eig.eigenvalues,
        a.rows().max(a.cols()),
    ))
}

/// Condition number from descending eigenvalues, with the same rank tolerance
/// as [`condition_number`].
pub fn condition_from_eigenvalues(eigenvalues: &[f64], dim: usize) -> f64 {
    let lmax = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lmax > 0.0) {
        return f64::INFINITY;
    }
    let cutoff = lmax * 1e-12 * dim as f64;
    let lmin = eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > cutoff)
        .fold(f64::INFINITY, f64::min);
    lmax / lmin
}

/// Thin QR by modified Gram-Schmidt with re-orthogonalization. `a` must have
/// `rows >= cols` and full column rank. `R` has a positive diagonal.
pub fn qr(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::contract(format!("qr needs rows >= cols, got {m}x{n}")));
    }
    let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = Matrix::zeros(n, n);
    for j in 0..n {
        let mut v = a.column(j);
        for _ in 0..2 {
            for (k, qk) in q_cols.iter().enumerate() {
                let d = dot(qk, &v);
                r.set(k, j, r.get(k, j) + d);
                v.iter_mut().zip(qk).for_each(|(x, q)| *x -= d * q);
            }
        }
        let nrm = norm(&v);
        if nrm <= f64::EPSILON * a.max_abs() * (m as f64) {
            return Err(Error::numerical(format!("qr: column {j} is linearly dependent")));
        }
        r.set(j, j, nrm);
        v.iter_mut().for_each(|x| *x /= nrm);
        q_cols.push(v);
    }
    let q = Matrix::from_fn(m, n, |i, j| q_cols[j][i]);
    Ok((q, r))
}

/// Solve `a x = b` for symmetric positive definite `a` via Cholesky.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return Err(Error::contract("solve_spd: dimension mismatch"));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k).powi(2);
        }
        if !(d > 0.0) {
            return Err(Error::numerical(format!(
                "matrix is not positive definite (pivot {j} = {d:e})"
            )));
        }
        let ljj = d.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Ok(x)
}
