//! Dense linear-algebra primitives.
//!
//! Everything here works on small, dense, row-major `f64` matrices: a cyclic
//! Jacobi eigensolver for symmetric matrices, a one-sided Jacobi SVD,
//! triangular and LU solves, and the spectral condition number. The greedy
//! algorithms elsewhere in the crate never need more than that.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Relative gap under which two candidates of a max/min scan count as tied.
///
/// Ties go to the lowest index. Every greedy selection in the crate uses this
/// rule so that mathematically identical selections stay identical under
/// rounding.
pub const TIE_RTOL: f64 = 1e-13;

const MAX_SWEEPS: usize = 100;

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries; all entries must be finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return contract(format!(
                "{} entries supplied for a {}x{} matrix",
                data.len(),
                rows,
                cols
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return contract(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            ));
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
            m[(i, i)] = 1.0;
        }
        m
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

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return contract("ragged rows");
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return contract("columns of unequal length");
        }
        let cols = columns.len();
        Self::new(
            rows,
            cols,
            (0..rows * cols).map(|k| columns[k % cols][k / cols]).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return contract(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return contract(format!(
                "vector of length {} for {} columns",
                x.len(),
                self.cols
            ));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        if self.shape() != other.shape() {
            return contract("shape mismatch in subtraction");
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Extracts the submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    fn check_symmetric(&self, rtol: f64) -> Result<()> {
        if !self.is_square() {
            return contract(format!("{}x{} matrix is not square", self.rows, self.cols));
        }
        let scale = self.max_abs();
        for i in 0..self.rows {
            for j in 0..i {
                if (self[(i, j)] - self[(j, i)]).abs() > rtol * scale {
                    return contract(format!("matrix is not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Index of the first entry within [`TIE_RTOL`] of the maximum.
///
/// NaN entries never win. Returns `None` for an empty slice.
pub fn first_argmax(values: &[f64]) -> Option<usize> {
    let max = values
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY && values.iter().all(|v| v.is_nan()) {
        return None;
    }
    let threshold = if max.is_finite() {
        max - TIE_RTOL * max.abs()
    } else {
        max
    };
    values.iter().position(|&v| v >= threshold)
}

/// Index of the first entry within [`TIE_RTOL`] of the minimum.
pub fn first_argmin(values: &[f64]) -> Option<usize> {
    let min = values
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::INFINITY, f64::min);
    if values.iter().all(|v| v.is_nan()) {
        return None;
    }
    let threshold = if min.is_finite() {
        min + TIE_RTOL * min.abs()
    } else {
        min
    };
    values.iter().position(|&v| v <= threshold)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, paired with `eigenvalues`.
    pub eigenvectors: DenseMatrix,
}

impl EigenResult {
    pub fn eigenvector(&self, q: usize) -> Vec<f64> {
        self.eigenvectors.column(q)
    }
}

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eig(c: &DenseMatrix) -> Result<EigenResult> {
    c.check_symmetric(1e-12)?;
    let n = c.rows();
    // work on the exactly symmetric part
    let mut a = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let mut v = DenseMatrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() <= f64::EPSILON * (app.abs() * aqq.abs()).sqrt()
                    || apq.abs() < f64::MIN_POSITIVE
                {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let cs = 1.0 / t.hypot(1.0);
                let sn = t * cs;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let new_kp = cs * akp - sn * akq;
                    let new_kq = sn * akp + cs * akq;
                    a[(k, p)] = new_kp;
                    a[(p, k)] = new_kp;
                    a[(k, q)] = new_kq;
                    a[(q, k)] = new_kq;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = cs * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + cs * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their original order
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    Ok(EigenResult {
        eigenvalues: order.iter().map(|&i| diag[i]).collect(),
        eigenvectors: DenseMatrix::from_fn(n, n, |i, j| v[(i, order[j])]),
    })
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Nonnegative singular values, descending; `min(rows, cols)` of them.
    pub singular_values: Vec<f64>,
    /// Left singular vectors as columns (`rows x k`).
    pub u: DenseMatrix,
    /// Right singular vectors as columns (`cols x k`).
    pub v: DenseMatrix,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return contract("svd of a matrix with non-finite entries");
    }
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            singular_values: t.singular_values,
            u: t.v,
            v: t.u,
        });
    }
    let (m, n) = a.shape();
    let mut w = a.columns();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let tol = f64::EPSILON * (m.max(1) as f64);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + zeta.hypot(1.0))
                };
                let cs = 1.0 / t.hypot(1.0);
                let sn = t * cs;
                rotate_pair(&mut w, p, q, cs, sn);
                rotate_pair(&mut v, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let s = norms[j];
        if s > 0.0 && s.is_normal() {
            u_cols.push(w[j].iter().map(|x| x / s).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            pending.push(slot);
        }
    }
    // exact zero singular values: complete U to an orthonormal set
    if !pending.is_empty() {
        let mut candidate = 0;
        for slot in pending {
            loop {
                let mut e = vec![0.0; m];
                e[candidate % m] = 1.0;
                candidate += 1;
                for _ in 0..2 {
                    for (k, col) in u_cols.iter().enumerate() {
                        if k == slot {
                            continue;
                        }
                        let proj = dot(&e, col);
                        e.iter_mut().zip(col).for_each(|(x, c)| *x -= proj * c);
                    }
                }
                let nrm = norm2(&e);
                if nrm > 1e-8 {
                    u_cols[slot] = e.iter().map(|x| x / nrm).collect();
                    break;
                }
            }
        }
    }

    Ok(Svd {
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        u: DenseMatrix::from_columns(&u_cols)?,
        v: DenseMatrix::from_columns(&order.iter().map(|&j| v[j].clone()).collect::<Vec<_>>())?,
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, cs: f64, sn: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = cs * a - sn * b;
        *y = sn * a + cs * b;
    }
}

/// Forward substitution for a unit-lower-triangular system `B x = rhs`.
///
/// Only the strictly lower triangle of `B` is read during the solve; the
/// diagonal must be 1 and the strict upper triangle zero to within `1e-10`.
pub fn solve_unit_lower_triangular(b: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = b.rows();
    if !b.is_square() || rhs.len() != n {
        return contract(format!(
            "unit-lower-triangular solve with {}x{} matrix and rhs of length {}",
            b.rows(),
            b.cols(),
            rhs.len()
        ));
    }
    for i in 0..n {
        if (b[(i, i)] - 1.0).abs() > 1e-12 {
            return contract(format!("diagonal entry {i} is {} instead of 1", b[(i, i)]));
        }
        for j in i + 1..n {
            if b[(i, j)].abs() > 1e-10 {
                return contract(format!("entry ({i}, {j}) above the diagonal is nonzero"));
            }
        }
    }
    let mut x = rhs.to_vec();
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= b[(i, j)] * x[j];
        }
        x[i] = acc;
    }
    Ok(x)
}

/// Back substitution for `U x = rhs` with `U` upper triangular (lower part ignored).
pub fn solve_upper_triangular(u: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = u.rows();
    if !u.is_square() || rhs.len() != n {
        return contract("upper-triangular solve shape mismatch");
    }
    let mut x = rhs.to_vec();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= u[(i, j)] * x[j];
        }
        if u[(i, i)] == 0.0 {
            return Err(Error::Singular(format!("zero diagonal entry {i}")));
        }
        x[i] = acc / u[(i, i)];
    }
    Ok(x)
}

/// Forward substitution for `L x = rhs` with `L` lower triangular (upper part ignored).
pub fn solve_lower_triangular(l: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = l.rows();
    if !l.is_square() || rhs.len() != n {
        return contract("lower-triangular solve shape mismatch");
    }
    let mut x = rhs.to_vec();
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= l[(i, j)] * x[j];
        }
        if l[(i, i)] == 0.0 {
            return Err(Error::Singular(format!("zero diagonal entry {i}")));
        }
        x[i] = acc / l[(i, i)];
    }
    Ok(x)
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    /// Factors a square matrix. Pivots below `1e-14 · max|A|` are rejected as singular.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return contract("LU of a non-square matrix");
        }
        let n = a.rows();
        let scale = a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let col: Vec<f64> = (k..n).map(|i| lu[(i, k)].abs()).collect();
            let p = k + first_argmax(&col).unwrap_or(0);
            if lu[(p, k)].abs() <= 1e-14 * scale || lu[(p, k)] == 0.0 {
                return Err(Error::Singular(format!("pivot {k} vanishes")));
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        let ukj = lu[(k, j)];
                        lu[(i, j)] -= l * ukj;
                    }
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows();
        if rhs.len() != n {
            return contract("LU solve: rhs length mismatch");
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[(i, j)] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[(i, j)] * y[j];
            }
            y[i] /= self.lu[(i, i)];
        }
        Ok(y)
    }

    pub fn det(&self) -> f64 {
        (0..self.lu.rows()).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }
}

/// Solves a square system by LU with partial pivoting.
pub fn solve(a: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    Lu::factor(a)?.solve(rhs)
}

/// Determinant by Gaussian elimination; never fails, returns 0 for exactly singular input.
pub fn determinant(a: &DenseMatrix) -> Result<f64> {
    if !a.is_square() {
        return contract("determinant of a non-square matrix");
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut det = 1.0;
    for k in 0..n {
        let col: Vec<f64> = (k..n).map(|i| m[(i, k)].abs()).collect();
        let p = k + first_argmax(&col).unwrap_or(0);
        if m[(p, k)] == 0.0 {
            return Ok(0.0);
        }
        if p != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(p, j)];
                m[(p, j)] = tmp;
            }
            det = -det;
        }
        let pivot = m[(k, k)];
        det *= pivot;
        for i in k + 1..n {
            let l = m[(i, k)] / pivot;
            for j in k + 1..n {
                let mkj = m[(k, j)];
                m[(i, j)] -= l * mkj;
            }
        }
    }
    Ok(det)
}

/// Spectral condition number `σ_max / σ_min`.
///
/// Returns `+inf` when `σ_min < 1e-14 · σ_max`.
pub fn cond2(a: &DenseMatrix) -> Result<f64> {
    let s = svd(a)?.singular_values;
    let max = s.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return Err(Error::InvalidArgument(
            "condition number of a zero matrix".into(),
        ));
    }
    let min = *s.last().unwrap();
    if min < 1e-14 * max {
        Ok(f64::INFINITY)
    } else {
        Ok(max / min)
    }
}

/// Minimum-norm least-squares solution of `A x ≈ b` via the SVD.
///
/// Singular values below `1e-14 · σ_max` are treated as zero.
pub fn least_squares(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return contract("least squares: rhs length mismatch");
    }
    let Svd {
        singular_values: s,
        u,
        v,
    } = svd(a)?;
    let cutoff = 1e-14 * s.first().copied().unwrap_or(0.0);
    let mut x = vec![0.0; a.cols()];
    for (k, &sk) in s.iter().enumerate() {
        if sk <= cutoff || sk == 0.0 {
            continue;
        }
        let coeff = (0..a.rows()).map(|i| u[(i, k)] * b[i]).sum::<f64>() / sk;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += coeff * v[(j, k)];
        }
    }
    Ok(x)
}

/// Number of singular values above `rel_cutoff · reference`.
pub fn numerical_rank(a: &DenseMatrix, rel_cutoff: f64, reference: f64) -> Result<usize> {
    Ok(svd(a)?
        .singular_values
        .iter()
        .filter(|&&s| s > rel_cutoff * reference)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn orthonormality_defect(v: &DenseMatrix) -> f64 {
        let g = v.transpose().matmul(v).unwrap();
        g.sub(&DenseMatrix::identity(g.rows())).unwrap().max_abs()
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = sym_eig(&DenseMatrix::identity(2)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0]);
        assert!(orthonormality_defect(&e.eigenvectors) < 1e-15);

        let e = sym_eig(&m(&[&[2.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(e.eigenvalues, vec![2.0, 1.0]);
        assert_eq!(e.eigenvector(0).iter().map(|x| x.abs()).collect::<Vec<_>>(), vec![1.0, 0.0]);
    }

    #[test]
    fn eig_two_by_two_characteristic_polynomial() {
        // λ² − 4λ + 3 = 0
        let c = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = sym_eig(&c).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        let v0 = e.eigenvector(0);
        let cv = c.mul_vec(&v0).unwrap();
        for k in 0..2 {
            assert!((cv[k] - 3.0 * v0[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(matches!(
            sym_eig(&DenseMatrix::zeros(2, 3)),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            sym_eig(&m(&[&[1.0, 2.0], &[0.0, 1.0]])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn svd_examples() {
        let s = svd(&DenseMatrix::identity(4)).unwrap();
        assert!(s.singular_values.iter().all(|&x| (x - 1.0).abs() < 1e-15));

        // rank one: ‖u‖‖v‖
        let u = [1.0, 2.0, 2.0];
        let v = [3.0, 4.0];
        let a = DenseMatrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        let s = svd(&a).unwrap();
        assert!((s.singular_values[0] - 15.0).abs() < 1e-13);
        assert!(s.singular_values[1].abs() < 1e-13);

        // symmetric with eigenvalues 3 ± √5
        let s = svd(&m(&[&[4.0, 2.0], &[2.0, 2.0]])).unwrap();
        assert!((s.singular_values[0] - (3.0 + 5f64.sqrt())).abs() < 1e-13);
        assert!((s.singular_values[1] - (3.0 - 5f64.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn svd_oracle_agrees_with_eig_of_gram_on_small_example() {
        let a = m(&[&[4.0, 2.0], &[2.0, 2.0]]);
        let gram = a.transpose().matmul(&a).unwrap();
        let e = sym_eig(&gram).unwrap();
        let s = svd(&a).unwrap();
        for k in 0..2 {
            assert!((e.eigenvalues[k].sqrt() - s.singular_values[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn svd_wide_and_zero_columns() {
        let a = m(&[&[1.0, 0.0, 0.0, 2.0], &[0.0, 0.0, 0.0, 0.0]]);
        let s = svd(&a).unwrap();
        assert_eq!(s.singular_values.len(), 2);
        assert!((s.singular_values[0] - 5f64.sqrt()).abs() < 1e-14);
        assert_eq!(s.singular_values[1], 0.0);
        assert!(orthonormality_defect(&s.u) < 1e-14);
        assert!(orthonormality_defect(&s.v) < 1e-14);
    }

    #[test]
    fn unit_lower_solves() {
        let x = solve_unit_lower_triangular(&DenseMatrix::identity(2), &[3.0, 4.0]).unwrap();
        assert_eq!(x, vec![3.0, 4.0]);
        let x = solve_unit_lower_triangular(&m(&[&[1.0, 0.0], &[0.5, 1.0]]), &[2.0, 2.0]).unwrap();
        assert_eq!(x, vec![2.0, 1.0]);
        let x = solve_unit_lower_triangular(&m(&[&[1.0]]), &[7.0]).unwrap();
        assert_eq!(x, vec![7.0]);
        assert!(solve_unit_lower_triangular(&DenseMatrix::identity(2), &[1.0]).is_err());
        assert!(solve_unit_lower_triangular(&m(&[&[2.0]]), &[1.0]).is_err());
    }

    #[test]
    fn cond2_examples() {
        assert!((cond2(&DenseMatrix::identity(3)).unwrap() - 1.0).abs() < 1e-15);
        assert!((cond2(&m(&[&[4.0, 0.0], &[0.0, 2.0]])).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(cond2(&m(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap(), f64::INFINITY);
        assert!(cond2(&DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn lu_and_determinant() {
        let a = m(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]);
        let lu = Lu::factor(&a).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]).unwrap();
        let ax = a.mul_vec(&x).unwrap();
        for (got, want) in ax.iter().zip([3.0, 2.0, 4.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        // det = 0·(1) − 2·(1 − 0) + 1·(0 − 3) = −5
        assert!((lu.det() + 5.0).abs() < 1e-14);
        assert!((determinant(&a).unwrap() + 5.0).abs() < 1e-14);
        assert_eq!(determinant(&m(&[&[1.0, 2.0], &[2.0, 4.0]])).unwrap(), 0.0);
        assert!(matches!(
            Lu::factor(&m(&[&[1.0, 2.0], &[2.0, 4.0]])),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn argmax_ties_go_to_lowest_index() {
        assert_eq!(first_argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(first_argmax(&[1.0, 3.0 * (1.0 - 1e-15), 3.0]), Some(1));
        assert_eq!(first_argmax(&[1.0, 2.9, 3.0]), Some(2));
        assert_eq!(first_argmax(&[f64::NAN, 0.0]), Some(1));
        assert_eq!(first_argmax(&[]), None);
        assert_eq!(first_argmin(&[2.0, 1.0, 1.0]), Some(1));
        assert_eq!(first_argmin(&[f64::INFINITY, f64::INFINITY]), Some(0));
    }

    #[test]
    fn least_squares_fits_overdetermined_line() {
        // y = 1 + 2x sampled exactly
        let a = m(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0]]);
        let x = least_squares(&a, &[1.0, 3.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-13 && (x[1] - 2.0).abs() < 1e-13);
    }
}
