//! Proper orthogonal decomposition of a snapshot family.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::kernels::{dot, sym_eig, DenseMatrix};
use crate::sampling::SnapshotMatrix;

const CLAMP_RTOL: f64 = 1e-12;

/// How many POD modes to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    Rank(usize),
    /// Smallest rank whose mean-square error `sqrt(Σ_{q>Q} λ_q)` is at most this value.
    Error(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PodBasis {
    /// All `N` correlation eigenvalues, descending, small negatives clamped to 0.
    pub eigenvalues: Vec<f64>,
    /// `Q` basis vectors over the x grid, orthonormal in the weighted product.
    pub basis: Vec<Vec<f64>>,
    pub weight: f64,
}

impl PodBasis {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// `sqrt(Σ_{q>Q} λ_q)`, the predicted mean-square projection error.
    pub fn trailing_error(&self) -> f64 {
        trailing_sum(&self.eigenvalues, self.rank()).sqrt()
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight * dot(a, b)
    }
}

fn trailing_sum(eigenvalues: &[f64], q: usize) -> f64 {
    // small terms first
    eigenvalues[q.min(eigenvalues.len())..].iter().rev().sum()
}

/// `C_ij = (1/N) (f_{y_j}, f_{y_i})` in the weighted product of the snapshot matrix.
pub fn correlation_matrix(s: &SnapshotMatrix) -> DenseMatrix {
    let n = s.cols();
    let cols = s.values().columns();
    let scale = s.weight() / n as f64;
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = scale * dot(&cols[i], &cols[j]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// The matrix `sqrt(weight / N) · S`, whose Gram matrix is the correlation matrix.
pub fn scaled_snapshot_matrix(s: &SnapshotMatrix) -> DenseMatrix {
    s.values().scaled((s.weight() / s.cols() as f64).sqrt())
}

/// Correlation eigenvalues with round-off negatives clamped to zero.
pub fn pod_spectrum(s: &SnapshotMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let eig = sym_eig(&correlation_matrix(s))?;
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let mut values = eig.eigenvalues;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -CLAMP_RTOL * top.max(f64::MIN_POSITIVE) {
                return contract(format!("correlation matrix has negative eigenvalue {v}"));
            }
            *v = 0.0;
        }
    }
    Ok((values, eig.eigenvectors))
}

/// Builds the POD basis of rank `Q` or the smallest rank meeting an error target.
pub fn pod_basis(s: &SnapshotMatrix, truncation: Truncation) -> Result<PodBasis> {
    let (m, n) = s.values().shape();
    let (eigenvalues, vectors) = pod_spectrum(s)?;
    let q = match truncation {
        Truncation::Rank(q) => {
            if q > n {
                return Err(Error::InvalidArgument(format!(
                    "rank {q} exceeds the {n} snapshots"
                )));
            }
            if q > m {
                return Err(Error::InvalidArgument(format!(
                    "rank {q} exceeds the {m} grid points"
                )));
            }
            q
        }
        Truncation::Error(eps) => {
            if !(eps > 0.0) {
                return Err(Error::InvalidArgument(format!("error target {eps} must be positive")));
            }
            (0..=n.min(m))
                .find(|&q| trailing_sum(&eigenvalues, q).sqrt() <= eps)
                .unwrap_or(n.min(m))
        }
    };

    let snapshots = s.values();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(q);
    for (k, &lambda) in eigenvalues[..q].iter().enumerate() {
        let vk = vectors.column(k);
        let mut h = snapshots.mul_vec(&vk)?;
        // directions of (near-)zero energy lose orthogonality to round-off; re-orthogonalize
        for _ in 0..2 {
            for prev in &basis {
                let c = s.weight() * dot(&h, prev);
                h.iter_mut().zip(prev).for_each(|(a, b)| *a -= c * b);
            }
        }
        let mut nrm = (s.weight() * dot(&h, &h)).sqrt();
        let energy = (n as f64 * lambda).sqrt();
        if !(nrm > 1e-8 * energy) || nrm == 0.0 {
            h = complete_direction(&basis, m, s.weight())?;
            nrm = 1.0;
        }
        basis.push(h.iter().map(|v| v / nrm).collect());
    }
    Ok(PodBasis {
        eigenvalues,
        basis,
        weight: s.weight(),
    })
}

/// A unit vector orthogonal to `basis`, built from the coordinate axes.
fn complete_direction(basis: &[Vec<f64>], m: usize, weight: f64) -> Result<Vec<f64>> {
    for axis in 0..m {
        let mut e = vec![0.0; m];
        e[axis] = 1.0;
        for _ in 0..2 {
            for prev in basis {
                let c = weight * dot(&e, prev);
                e.iter_mut().zip(prev).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nrm = (weight * dot(&e, &e)).sqrt();
        if nrm > 1e-3 / weight.sqrt() {
            return Ok(e.iter().map(|v| v / nrm).collect());
        }
    }
    Err(Error::DependentBasis { index: basis.len() })
}

/// Orthogonal projection onto the basis: coefficients `g_q = (f, h_q)/(h_q, h_q)` and `Σ g_q h_q`.
pub fn pod_project(basis: &PodBasis, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = basis.basis.first().map_or(f.len(), Vec::len);
    if f.len() != m {
        return contract(format!("vector of length {} for a grid of {m} points", f.len()));
    }
    let coeffs: Vec<f64> = basis
        .basis
        .iter()
        .map(|h| basis.inner(f, h) / basis.inner(h, h))
        .collect();
    let mut recon = vec![0.0; m];
    for (g, h) in coeffs.iter().zip(&basis.basis) {
        recon.iter_mut().zip(h).for_each(|(r, hv)| *r += g * hv);
    }
    Ok((coeffs, recon))
}

/// Mean-square projection error `sqrt((1/N) Σ_y ‖f_y − P_Q f_y‖²)` over the training snapshots.
pub fn pod_error(s: &SnapshotMatrix, basis: &PodBasis) -> Result<f64> {
    projection_error(s, &basis.basis)
}

/// Mean-square error of the orthogonal projection onto an arbitrary orthonormal set.
pub fn projection_error(s: &SnapshotMatrix, orthonormal: &[Vec<f64>]) -> Result<f64> {
    if orthonormal.iter().any(|h| h.len() != s.rows()) {
        return contract("basis vectors do not live on this snapshot grid");
    }
    let mut total = 0.0;
    for j in 0..s.cols() {
        let mut r = s.snapshot(j);
        let f = r.clone();
        for h in orthonormal {
            let c = s.inner(&f, h);
            r.iter_mut().zip(h).for_each(|(a, b)| *a -= c * b);
        }
        total += s.inner(&r, &r);
    }
    Ok((total / s.cols() as f64).sqrt())
}
