//! Cross-method audits and brute-force oracles.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aca::{aca2_bivariate, cross_interpolant, AcaOptions, RowRule};
use crate::eim::{eim_greedy, eim_interpolate, EimOptions, Norm};
use crate::error::{Error, Result};
use crate::kernels::{determinant, first_argmax, svd, DenseMatrix};
use crate::pod::{pod_basis, projection_error, scaled_snapshot_matrix, Truncation};
use crate::sampling::{materialize_family, uniform_grid, Family, SnapshotMatrix};

/// Tolerance small enough that the greedy runs stop on rank or cap, never on error.
const NO_TOL: f64 = f64::MIN_POSITIVE;

/// `U Vᵀ` with uniform `(-1, 1)` factors of inner size `rank`, plus uniform noise of the given amplitude.
pub fn random_low_rank(seed: u64, m: usize, n: usize, rank: usize, noise: f64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..m * rank).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..n * rank).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::from_fn(m, n, |i, j| {
        let clean: f64 = (0..rank).map(|k| u[i * rank + k] * v[j * rank + k]).sum();
        clean + noise * rng.random_range(-1.0..1.0)
    })
}

#[derive(Debug, Clone)]
pub struct CorpusInstance {
    pub name: String,
    pub seed: Option<u64>,
    pub rank: Option<usize>,
    pub snapshots: SnapshotMatrix,
}

/// `count` seeded random instances of size up to 20×15 and rank 1 to 6, then the analytic and Cauchy families.
pub fn corpus(count: usize, base_seed: u64) -> Result<Vec<CorpusInstance>> {
    let mut out = Vec::with_capacity(count + 2);
    for k in 0..count as u64 {
        let seed = base_seed.wrapping_add(k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let m = rng.random_range(6..=20);
        let n = rng.random_range(6..=15);
        let rank = rng.random_range(1..=6);
        let a = random_low_rank(seed, m, n, rank, 1e-3);
        out.push(CorpusInstance {
            name: format!("random_{seed}"),
            seed: Some(seed),
            rank: Some(rank),
            snapshots: SnapshotMatrix::from_matrix(a)?,
        });
    }
    for (name, fam, m, n) in [("analytic", Family::Analytic, 20, 20), ("cauchy", Family::Cauchy { c: 1.0 }, 15, 15)] {
        let s = materialize_family(&fam, &uniform_grid(0.0, 1.0, m)?, &uniform_grid(0.0, 1.0, n)?)?;
        out.push(CorpusInstance {
            name: name.into(),
            seed: None,
            rank: None,
            snapshots: s,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub qmax: usize,
    pub rank_aca: usize,
    pub rank_eim: usize,
    pub aca_rows: Vec<usize>,
    pub aca_cols: Vec<usize>,
    pub eim_points: Vec<usize>,
    pub eim_params: Vec<usize>,
    pub indices_match: bool,
    /// Largest `|g_q(y) − r_{q-1}(x_q, y)|` over steps and training parameters, relative to `scale`.
    pub coefficient_deviation: f64,
    /// Largest difference of the two interpolants on the grid, relative to `scale`.
    pub interpolant_deviation: f64,
    pub scale: f64,
    pub divergence: Option<String>,
    pub passed: bool,
}

/// Runs global cross approximation and sup-norm EIM side by side and compares them.
pub fn check_equivalence_aca_eim(s: &SnapshotMatrix, qmax: usize) -> Result<EquivalenceReport> {
    const RTOL: f64 = 1e-10;
    let aca = aca2_bivariate(s, &AcaOptions::global(NO_TOL).with_max_rank(qmax))?;
    let eim = eim_greedy(s, &EimOptions::new(NO_TOL, Norm::Inf).with_max_rank(qmax))?;
    let scale = s.max_abs();
    let mut divergence = None;

    let indices_match = aca.tau == eim.interp_indices && aca.sigma == eim.sample_indices;
    if !indices_match {
        let q = (0..aca.rank().min(eim.rank()))
            .find(|&q| aca.tau[q] != eim.interp_indices[q] || aca.sigma[q] != eim.sample_indices[q])
            .unwrap_or(aca.rank().min(eim.rank()));
        divergence = Some(format!(
            "step {}: cross {:?} vs interpolation {:?}",
            q + 1,
            aca.tau.get(q).zip(aca.sigma.get(q)),
            eim.interp_indices.get(q).zip(eim.sample_indices.get(q))
        ));
    }

    let q = aca.rank().min(eim.rank());
    let mut coefficient_deviation: f64 = 0.0;
    let mut interpolant_deviation: f64 = 0.0;
    if q > 0 && indices_match {
        let cross = cross_interpolant(&aca)?;
        let ca = cross.eval_matrix(s.values())?;
        for y in 0..s.cols() {
            let (g, interp) = eim_interpolate(&eim, &s.snapshot(y))?;
            for (k, gk) in g.iter().enumerate() {
                let d = (gk - aca.v[k][y]).abs() / scale;
                if d > coefficient_deviation {
                    coefficient_deviation = d;
                    if d > RTOL && divergence.is_none() {
                        divergence = Some(format!("step {}, parameter {y}: g = {gk:e}, remainder = {:e}", k + 1, aca.v[k][y]));
                    }
                }
            }
            for (x, v) in interp.iter().enumerate() {
                let d = (v - ca[(x, y)]).abs() / scale;
                if d > interpolant_deviation {
                    interpolant_deviation = d;
                    if d > RTOL && divergence.is_none() {
                        divergence = Some(format!("point ({x}, {y}): {v:e} vs {:e}", ca[(x, y)]));
                    }
                }
            }
        }
    }
    let passed = indices_match && coefficient_deviation <= RTOL && interpolant_deviation <= RTOL;
    Ok(EquivalenceReport {
        qmax,
        rank_aca: aca.rank(),
        rank_eim: eim.rank(),
        aca_rows: aca.tau,
        aca_cols: aca.sigma,
        eim_points: eim.interp_indices,
        eim_params: eim.sample_indices,
        indices_match,
        coefficient_deviation,
        interpolant_deviation,
        scale,
        divergence,
        passed,
    })
}

/// `σ_{Q+1}` of `sqrt(weight / N) · S`, the discrete n-width proxy.
pub fn nwidth_oracle(s: &SnapshotMatrix, q: usize) -> Result<f64> {
    if q >= s.cols() {
        return Err(Error::InvalidArgument(format!("rank {q} needs more than {} snapshots", s.cols())));
    }
    let sv = svd(&scaled_snapshot_matrix(s))?.singular_values;
    Ok(sv.get(q).copied().unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMethod {
    Pod,
    AcaGlobal,
    AcaPartial,
    EimInf,
    Eim2,
}

impl DecayMethod {
    pub const ALL: [DecayMethod; 5] = [Self::Pod, Self::AcaGlobal, Self::AcaPartial, Self::EimInf, Self::Eim2];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pod => "pod",
            Self::AcaGlobal => "aca_global",
            Self::AcaPartial => "aca_partial",
            Self::EimInf => "eim_inf",
            Self::Eim2 => "eim_2",
        }
    }
}

impl fmt::Display for DecayMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecayMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub q: usize,
    /// One error per method, in the order of [`DecayTable::methods`].
    pub errors: Vec<f64>,
    pub nwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub methods: Vec<DecayMethod>,
    pub rows: Vec<DecayRow>,
}

impl DecayTable {
    pub fn column(&self, method: DecayMethod) -> Option<Vec<f64>> {
        let k = self.methods.iter().position(|&m| m == method)?;
        Some(self.rows.iter().map(|r| r.errors[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("q");
        for m in &self.methods {
            out.push(',');
            out.push_str(m.name());
        }
        out.push_str(",nwidth\n");
        for row in &self.rows {
            out.push_str(&row.q.to_string());
            for e in row.errors.iter().chain(std::iter::once(&row.nwidth)) {
                out.push_str(&format!(",{e:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Value after `q` terms, holding the last one once the run has stopped.
fn held(history: &[f64], q: usize) -> f64 {
    history.get(q).or(history.last()).copied().unwrap_or(0.0)
}

/// Per-rank errors of each method for `q = 0..=qmax` with the n-width floor.
///
/// POD reports the mean-square error, the cross approximations the largest
/// remainder entry and EIM its training error in its own norm.
pub fn decay_report(s: &SnapshotMatrix, methods: &[DecayMethod], qmax: usize) -> Result<DecayTable> {
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    let (m, n) = s.values().shape();
    let cap = qmax.min(m.min(n));
    let sv = svd(&scaled_snapshot_matrix(s))?.singular_values;
    let mut columns = Vec::with_capacity(methods.len());
    for &method in methods {
        let col: Vec<f64> = match method {
            DecayMethod::Pod => {
                let basis = pod_basis(s, Truncation::Rank(cap))?.basis;
                let errs = (0..=cap)
                    .map(|q| projection_error(s, &basis[..q]))
                    .collect::<Result<Vec<_>>>()?;
                (0..=qmax).map(|q| held(&errs, q)).collect()
            }
            DecayMethod::AcaGlobal | DecayMethod::AcaPartial => {
                let opts = if method == DecayMethod::AcaGlobal {
                    AcaOptions::global(NO_TOL)
                } else {
                    AcaOptions::partial(NO_TOL, RowRule::Cyclic)
                };
                let h = aca2_bivariate(s, &opts.with_max_rank(cap.max(1)))?.history;
                (0..=qmax).map(|q| held(&h, q)).collect()
            }
            DecayMethod::EimInf | DecayMethod::Eim2 => {
                let norm = if method == DecayMethod::EimInf { Norm::Inf } else { Norm::L2 };
                let h = eim_greedy(s, &EimOptions::new(NO_TOL, norm).with_max_rank(cap.max(1)))?.history;
                (0..=qmax).map(|q| held(&h, q)).collect()
            }
        };
        columns.push(col);
    }
    let rows = (0..=qmax)
        .map(|q| DecayRow {
            q,
            errors: columns.iter().map(|c| c[q]).collect(),
            nwidth: sv.get(q).copied().unwrap_or(0.0),
        })
        .collect();
    Ok(DecayTable {
        methods: methods.to_vec(),
        rows,
    })
}

/// Leja sequence by products of distances: each node maximizes `Π |x − x_j|` over the previous ones.
pub fn brute_force_leja(points: &[f64], count: usize) -> Vec<usize> {
    let mut nodes: Vec<usize> = Vec::with_capacity(count);
    while nodes.len() < count.min(points.len()) {
        let w: Vec<f64> = points
            .iter()
            .map(|&x| nodes.iter().map(|&j| (x - points[j]).abs()).product())
            .collect();
        match first_argmax(&w) {
            Some(i) if w[i] > 0.0 => nodes.push(i),
            _ => break,
        }
    }
    nodes
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// The `q × q` submatrix of largest `|det|` by exhaustive search; ties keep the first found.
pub fn max_volume_exhaustive(a: &DenseMatrix, q: usize) -> Result<(Vec<usize>, Vec<usize>, f64)> {
    let (m, n) = a.shape();
    if q == 0 || q > m.min(n) {
        return Err(Error::InvalidArgument(format!("submatrix size {q} for a {m}x{n} matrix")));
    }
    let (rows, cols) = (subsets(m, q), subsets(n, q));
    let mut best = (vec![], vec![], -1.0);
    for r in &rows {
        for c in &cols {
            let d = determinant(&a.select(r, c))?.abs();
            if d > best.2 {
                best = (r.clone(), c.clone(), d);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_stops_at_one() {
        let a = DenseMatrix::from_fn(5, 4, |i, j| (i + 1) as f64 * (j as f64 - 1.5));
        let r = check_equivalence_aca_eim(&SnapshotMatrix::from_matrix(a).unwrap(), 4).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!((r.rank_aca, r.rank_eim), (1, 1));
    }

    #[test]
    fn tied_maximum_gives_same_choice() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![2.0, -1.0, 0.3], vec![0.1, 0.2, 1.5]]).unwrap();
        let r = check_equivalence_aca_eim(&SnapshotMatrix::from_matrix(a).unwrap(), 3).unwrap();
        assert!(r.passed, "{r:?}");
        // two cells of size 2: column 0 is scanned first, row 1 holds its maximum
        assert_eq!((r.aca_rows[0], r.aca_cols[0]), (1, 0));
    }

    #[test]
    fn nwidth_of_identity() {
        let s = SnapshotMatrix::from_matrix(DenseMatrix::identity(4)).unwrap().unit_weight();
        let scale = (1.0f64 / 4.0).sqrt();
        for q in 0..4 {
            let w = nwidth_oracle(&s, q).unwrap();
            assert!((w - scale).abs() < 1e-14);
        }
        assert!(nwidth_oracle(&s, 4).is_err());
    }

    #[test]
    fn leja_on_five_points() {
        let pts = [-1.0, -0.5, 0.0, 0.5, 1.0];
        assert_eq!(brute_force_leja(&pts, 5), vec![0, 4, 2, 1, 3]);
    }

    #[test]
    fn exhaustive_volume_of_diagonal() {
        let a = DenseMatrix::from_rows(&[vec![3.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
        let (r, c, d) = max_volume_exhaustive(&a, 2).unwrap();
        assert_eq!((r, c), (vec![0, 2], vec![0, 2]));
        assert_eq!(d, 6.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in DecayMethod::ALL {
            assert_eq!(m.name().parse::<DecayMethod>().unwrap(), m);
        }
        assert!("svd".parse::<DecayMethod>().is_err());
    }
}
