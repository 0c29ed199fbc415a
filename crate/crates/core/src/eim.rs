//! Empirical interpolation: greedy basis and point selection on a snapshot
//! matrix, interpolant evaluation, continuous basis recovery, Lebesgue
//! constants and the functional (gEIM) variant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aca::{global_pivot, greedy_points, subtract_cross, GreedyPoints};
use crate::error::{contract, Error, Result};
use crate::kernels::{first_argmax, max_abs, solve_unit_lower_triangular, solve_upper_triangular, DenseMatrix};
use crate::sampling::{BivariateSource, SnapshotMatrix};
use crate::{Status, PIVOT_RTOL};

/// Discrete `L^p` norm used for the greedy parameter selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    Inf,
}

impl Norm {
    /// `(weight · Σ |v_i|^p)^{1/p}`; the max norm carries no weight.
    pub fn eval(self, v: &[f64], weight: f64) -> f64 {
        match self {
            Norm::L1 => weight * v.iter().map(|x| x.abs()).sum::<f64>(),
            Norm::L2 => (weight * v.iter().map(|x| x * x).sum::<f64>()).sqrt(),
            Norm::Inf => max_abs(v),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Norm::L1),
            "2" => Ok(Norm::L2),
            "inf" | "Inf" | "INF" => Ok(Norm::Inf),
            other => Err(Error::InvalidArgument(format!("norm must be 1, 2 or inf, got '{other}'"))),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "1",
            Norm::L2 => "2",
            Norm::Inf => "inf",
        })
    }
}

/// A linear functional given by its weights on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    weights: Vec<f64>,
    support: Vec<usize>,
    pub label: String,
}

impl Functional {
    pub fn new(weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return contract("functional weights must be finite");
        }
        let support: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] != 0.0).collect();
        if support.is_empty() {
            return contract("functional is identically zero");
        }
        Ok(Self {
            weights,
            support,
            label: label.into(),
        })
    }

    /// Point evaluation at grid index `i` of an `n`-point grid.
    pub fn dirac(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self::new(w, format!("dirac({i})")).expect("valid index")
    }

    /// Mean over the whole grid.
    pub fn average(n: usize) -> Self {
        Self::new(vec![1.0 / n as f64; n], "average").expect("non-empty grid")
    }

    /// Mean over the indices `center - half ..= center + half`, clipped to the grid.
    pub fn window(n: usize, center: usize, half: usize) -> Self {
        let lo = center.saturating_sub(half);
        let hi = (center + half).min(n - 1);
        let c = 1.0 / (hi - lo + 1) as f64;
        let w = (0..n).map(|k| if (lo..=hi).contains(&k) { c } else { 0.0 }).collect();
        Self::new(w, format!("window({center},{half})")).expect("non-empty window")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_k w_k v_k` over the support; a point evaluation returns `v_i` unchanged.
    pub fn apply(&self, v: &[f64]) -> f64 {
        let mut it = self.support.iter();
        let first = *it.next().expect("non-empty support");
        it.fold(self.weights[first] * v[first], |acc, &k| acc + self.weights[k] * v[k])
    }
}

/// Dirac functionals at every grid point, in index order.
pub fn dirac_dictionary(n: usize) -> Vec<Functional> {
    (0..n).map(|i| Functional::dirac(n, i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EimOptions {
    pub tol: f64,
    pub norm: Norm,
    pub max_rank: Option<usize>,
}

impl EimOptions {
    pub fn new(tol: f64, norm: Norm) -> Self {
        Self {
            tol,
            norm,
            max_rank: None,
        }
    }

    pub fn with_max_rank(mut self, q: usize) -> Self {
        self.max_rank = Some(q);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EimSystem {
    /// Selected parameters `j_1..j_Q` (columns).
    pub sample_indices: Vec<usize>,
    /// Interpolation points `i_1..i_Q` (rows).
    pub interp_indices: Vec<usize>,
    pub sample_y: Vec<f64>,
    pub interp_x: Vec<f64>,
    /// `h_q` on the x grid with `h_q(x_q) = 1`.
    pub basis: Vec<Vec<f64>>,
    /// `B_{ij} = h_j(x_i)`, unit lower triangular.
    pub b: DenseMatrix,
    /// `g_q(y) = r_{q-1}(x_q, y)` on the training parameters.
    pub coefficients: Vec<Vec<f64>>,
    /// `f_{y_q} = Σ_{l ≤ q} s_{q,l} h_l`; row `q` has `q + 1` entries.
    pub recovery_s: Vec<Vec<f64>>,
    /// Worst training error after `k` terms.
    pub history: Vec<f64>,
    pub norm: Norm,
    pub status: Status,
    pub weight: f64,
}

impl EimSystem {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

fn interpolation_matrix(basis: &[Vec<f64>], points: &[usize]) -> DenseMatrix {
    let q = basis.len();
    DenseMatrix::from_fn(q, q, |i, j| basis[j][points[i]])
}

fn stop_status(rank: usize, cap: usize, user_cap: Option<usize>) -> Option<Status> {
    (rank >= cap).then(|| {
        if rank < user_cap.unwrap_or(usize::MAX) {
            Status::NumericalRank
        } else {
            Status::MaxRank
        }
    })
}

/// Greedy empirical interpolation on the columns of a snapshot matrix.
pub fn eim_greedy(s: &SnapshotMatrix, opts: &EimOptions) -> Result<EimSystem> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let (m, n) = s.values().shape();
    let cap = opts.max_rank.unwrap_or(m.min(n)).min(m.min(n));
    let thresh = PIVOT_RTOL * s.max_abs();
    let mut r = s.values().clone();
    let mut sys = EimSystem {
        sample_indices: vec![],
        interp_indices: vec![],
        sample_y: vec![],
        interp_x: vec![],
        basis: vec![],
        b: DenseMatrix::zeros(0, 0),
        coefficients: vec![],
        recovery_s: vec![],
        history: vec![],
        norm: opts.norm,
        status: Status::NumericalRank,
        weight: s.weight(),
    };
    loop {
        let (i, j, err) = if opts.norm == Norm::Inf {
            let (i, j) = global_pivot(&r);
            (i, j, r[(i, j)].abs())
        } else {
            let errs: Vec<f64> = (0..n).map(|j| opts.norm.eval(&r.column(j), s.weight())).collect();
            let j = first_argmax(&errs).unwrap_or(0);
            let col: Vec<f64> = r.column(j).iter().map(|x| x.abs()).collect();
            (first_argmax(&col).unwrap_or(0), j, errs[j])
        };
        sys.history.push(err);
        if err < opts.tol {
            sys.status = Status::ToleranceReached;
            break;
        }
        if let Some(st) = stop_status(sys.rank(), cap, opts.max_rank) {
            sys.status = st;
            break;
        }
        let p = r[(i, j)];
        if !(p.abs() > thresh) {
            sys.status = Status::NumericalRank;
            break;
        }
        let h: Vec<f64> = r.column(j).iter().map(|x| x / p).collect();
        let g = r.row(i).to_vec();
        subtract_cross(&mut r, &h, &g);
        log::debug!("eim step {}: y index {j}, x index {i}, error {err:e}", sys.rank() + 1);
        sys.sample_indices.push(j);
        sys.interp_indices.push(i);
        sys.sample_y.push(s.grid_y().points()[j]);
        sys.interp_x.push(s.grid_x().points()[i]);
        sys.basis.push(h);
        sys.coefficients.push(g);
    }
    sys.b = interpolation_matrix(&sys.basis, &sys.interp_indices);
    sys.recovery_s = (0..sys.rank())
        .map(|q| (0..=q).map(|l| sys.coefficients[l][sys.sample_indices[q]]).collect())
        .collect();
    Ok(sys)
}

/// Coefficients `B g = f(x_τ)` and the interpolant `Σ g_q h_q` on the grid.
pub fn eim_interpolate(sys: &EimSystem, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    interpolate_with(&sys.basis, &sys.b, &sys.interp_indices, f)
}

fn interpolate_with(basis: &[Vec<f64>], b: &DenseMatrix, points: &[usize], f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = basis.first().map_or(f.len(), Vec::len);
    if f.len() != m {
        return contract(format!("vector of length {} for a grid of {m} points", f.len()));
    }
    let rhs: Vec<f64> = points.iter().map(|&i| f[i]).collect();
    let g = solve_unit_lower_triangular(b, &rhs)?;
    Ok((g.clone(), combine(basis, &g, m)))
}

fn combine(basis: &[Vec<f64>], g: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for (c, h) in g.iter().zip(basis) {
        out.iter_mut().zip(h).for_each(|(o, hv)| *o += c * hv);
    }
    out
}

/// Basis functions evaluated away from the grid through the recovery recursion
/// `h_q = (f_{y_q} − Σ_{l<q} s_{q,l} h_l) / s_{q,q}`.
pub struct ContinuousBasis<'a> {
    sample_y: Vec<f64>,
    s: Vec<Vec<f64>>,
    source: &'a dyn BivariateSource,
}

pub fn eim_continuous_recover<'a>(sys: &EimSystem, source: &'a dyn BivariateSource) -> ContinuousBasis<'a> {
    ContinuousBasis {
        sample_y: sys.sample_y.clone(),
        s: sys.recovery_s.clone(),
        source,
    }
}

impl ContinuousBasis<'_> {
    /// `(h_1(x), …, h_Q(x))`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut h: Vec<f64> = Vec::with_capacity(self.s.len());
        for (q, row) in self.s.iter().enumerate() {
            let mut acc = self.source.eval(x, self.sample_y[q]);
            for l in 0..q {
                acc -= row[l] * h[l];
            }
            h.push(acc / row[q]);
        }
        h
    }

    /// Interpolant of `f_y` at an arbitrary `x`, from the values of `f_y` at the interpolation points.
    pub fn interpolate(&self, sys: &EimSystem, values_at_points: &[f64], x: f64) -> Result<f64> {
        let g = solve_unit_lower_triangular(&sys.b, values_at_points)?;
        Ok(g.iter().zip(self.eval(x)).map(|(a, b)| a * b).sum())
    }
}

/// `Λ_q = max_x Σ_i |L_i(x)|` for `q = 1..=up_to`, where `B_qᵀ L(x) = (h_1(x), …, h_q(x))`.
pub fn lebesgue_constants(basis: &[Vec<f64>], b: &DenseMatrix, up_to: usize) -> Result<Vec<f64>> {
    if up_to > basis.len() || b.rows() < up_to {
        return contract(format!("Lebesgue constants requested up to {up_to} of {} terms", basis.len()));
    }
    let m = basis.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(up_to);
    for q in 1..=up_to {
        let idx: Vec<usize> = (0..q).collect();
        let bt = b.select(&idx, &idx).transpose();
        let mut worst: f64 = 0.0;
        for x in 0..m {
            let hx: Vec<f64> = basis[..q].iter().map(|h| h[x]).collect();
            let l = solve_upper_triangular(&bt, &hx)?;
            worst = worst.max(l.iter().map(|v| v.abs()).sum());
        }
        out.push(worst);
    }
    Ok(out)
}

/// Lebesgue constants of an EIM system.
pub fn lebesgue_constant(sys: &EimSystem, up_to: usize) -> Result<Vec<f64>> {
    lebesgue_constants(&sys.basis, &sys.b, up_to)
}

/// Interpolation points for a prescribed basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSelection {
    pub indices: Vec<usize>,
    /// Normalized basis `h_q` with `h_q(x_q) = 1`, spanning the same nested spaces.
    pub basis: Vec<Vec<f64>>,
    pub b: DenseMatrix,
}

/// Greedy point selection that treats the given basis members, in order, as the residual generators.
pub fn eim_points_for_basis(basis: &[Vec<f64>]) -> Result<PointSelection> {
    let m = basis.first().map_or(0, Vec::len);
    if basis.is_empty() || m == 0 || basis.iter().any(|w| w.len() != m) {
        return contract("basis vectors must be non-empty and of equal length");
    }
    let GreedyPoints { nodes: indices, hs, dependent, .. } = greedy_points(basis);
    if let Some(index) = dependent {
        return Err(Error::DependentBasis { index });
    }
    let b = interpolation_matrix(&hs, &indices);
    Ok(PointSelection { indices, basis: hs, b })
}

/// gEIM output: point evaluations replaced by moments from a dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeimSystem {
    pub sample_indices: Vec<usize>,
    /// Indices into the dictionary of the selected functionals.
    pub functional_indices: Vec<usize>,
    pub selected: Vec<Functional>,
    /// `h_q` with `σ_q(h_q) = 1`.
    pub basis: Vec<Vec<f64>>,
    /// `B_{ij} = σ_i(h_j)`, unit lower triangular.
    pub b: DenseMatrix,
    /// `g_q(y) = σ_q(r_{q-1}(·, y))` on the training parameters.
    pub coefficients: Vec<Vec<f64>>,
    pub history: Vec<f64>,
    pub norm: Norm,
    pub status: Status,
    pub weight: f64,
}

impl GeimSystem {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

/// Generalized empirical interpolation over a dictionary of functionals on the x grid.
pub fn geim_greedy(s: &SnapshotMatrix, dictionary: &[Functional], opts: &EimOptions) -> Result<GeimSystem> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let (m, n) = s.values().shape();
    if dictionary.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    if dictionary.iter().any(|f| f.len() != m) {
        return contract("dictionary functionals do not match the x grid");
    }
    let cap = opts.max_rank.unwrap_or(m.min(n)).min(m.min(n));
    let mut r = s.values().clone();
    let mut sys = GeimSystem {
        sample_indices: vec![],
        functional_indices: vec![],
        selected: vec![],
        basis: vec![],
        b: DenseMatrix::zeros(0, 0),
        coefficients: vec![],
        history: vec![],
        norm: opts.norm,
        status: Status::NumericalRank,
        weight: s.weight(),
    };
    let mut thresh = None;
    loop {
        let errs: Vec<f64> = (0..n).map(|j| opts.norm.eval(&r.column(j), s.weight())).collect();
        let j = first_argmax(&errs).unwrap_or(0);
        let err = errs[j];
        sys.history.push(err);
        if err < opts.tol {
            sys.status = Status::ToleranceReached;
            break;
        }
        if let Some(st) = stop_status(sys.rank(), cap, opts.max_rank) {
            sys.status = st;
            break;
        }
        let col = r.column(j);
        let moments: Vec<f64> = dictionary.iter().map(|f| f.apply(&col)).collect();
        let scale = *thresh.get_or_insert_with(|| {
            PIVOT_RTOL * max_abs(&moments).max(PIVOT_RTOL * s.max_abs())
        });
        let k = first_argmax(&moments.iter().map(|v| v.abs()).collect::<Vec<_>>()).unwrap_or(0);
        let p = moments[k];
        if !(p.abs() > scale) {
            sys.status = Status::NumericalRank;
            break;
        }
        let h: Vec<f64> = col.iter().map(|x| x / p).collect();
        let g: Vec<f64> = (0..n).map(|y| dictionary[k].apply(&r.column(y))).collect();
        subtract_cross(&mut r, &h, &g);
        sys.sample_indices.push(j);
        sys.functional_indices.push(k);
        sys.selected.push(dictionary[k].clone());
        sys.basis.push(h);
        sys.coefficients.push(g);
    }
    let q = sys.rank();
    sys.b = DenseMatrix::from_fn(q, q, |i, l| sys.selected[i].apply(&sys.basis[l]));
    Ok(sys)
}

/// Moment-matching interpolant of `f` in a gEIM system.
pub fn geim_interpolate(sys: &GeimSystem, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = sys.basis.first().map_or(f.len(), Vec::len);
    if f.len() != m {
        return contract(format!("vector of length {} for a grid of {m} points", f.len()));
    }
    let rhs: Vec<f64> = sys.selected.iter().map(|s| s.apply(f)).collect();
    let g = solve_unit_lower_triangular(&sys.b, &rhs)?;
    Ok((g.clone(), combine(&sys.basis, &g, m)))
}

/// `max_y ‖I_Q f_y‖₂ / ‖f_y‖₂` over the training snapshots, a lower estimate of
/// the `L²` operator norm of the gEIM interpolant.
pub fn geim_lebesgue_l2(sys: &GeimSystem, s: &SnapshotMatrix) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..s.cols() {
        let f = s.snapshot(j);
        let nf = Norm::L2.eval(&f, s.weight());
        if nf == 0.0 {
            continue;
        }
        let (_, v) = geim_interpolate(sys, &f)?;
        worst = worst.max(Norm::L2.eval(&v, s.weight()) / nf);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SnapshotMatrix;

    fn snap(rows: &[&[f64]]) -> SnapshotMatrix {
        SnapshotMatrix::from_matrix(
            DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn separable_family_is_rank_one() {
        let g = [0.5, -2.0, 1.0];
        let h = [1.0, 3.0];
        let s = SnapshotMatrix::from_matrix(DenseMatrix::from_fn(3, 2, |i, j| g[i] * h[j])).unwrap();
        let sys = eim_greedy(&s, &EimOptions::new(1e-12, Norm::Inf)).unwrap();
        assert_eq!(sys.rank(), 1);
        assert_eq!(sys.interp_indices, vec![1]);
        for (hv, gv) in sys.basis[0].iter().zip(g) {
            assert!((hv - gv / -2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_gives_identity_b() {
        let s = snap(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let sys = eim_greedy(&s, &EimOptions::new(1e-12, Norm::Inf)).unwrap();
        assert_eq!(sys.rank(), 3);
        assert_eq!(sys.b, DenseMatrix::identity(3));
    }

    #[test]
    fn interpolating_basis_member_gives_unit_vector() {
        let s = snap(&[&[1.0, 2.0, 0.5], &[3.0, -1.0, 2.0], &[0.0, 1.0, 4.0], &[1.0, 1.0, 1.0]]);
        let sys = eim_greedy(&s, &EimOptions::new(1e-12, Norm::L2)).unwrap();
        let (g, _) = eim_interpolate(&sys, &sys.basis[0]).unwrap();
        assert_eq!(g[0], 1.0);
        assert!(g[1..].iter().all(|v| v.abs() < 1e-15));
        assert!(eim_interpolate(&sys, &[1.0]).is_err());
    }

    #[test]
    fn norms_are_weighted() {
        assert_eq!(Norm::L1.eval(&[1.0, -2.0], 0.5), 1.5);
        assert_eq!(Norm::L2.eval(&[3.0, 4.0], 1.0), 5.0);
        assert_eq!(Norm::Inf.eval(&[3.0, -4.0], 0.1), 4.0);
        assert_eq!("inf".parse::<Norm>().unwrap(), Norm::Inf);
        assert!("3".parse::<Norm>().is_err());
    }

    #[test]
    fn functionals_apply() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(Functional::dirac(4, 2).apply(&v), 3.0);
        assert_eq!(Functional::average(4).apply(&v), 2.5);
        assert_eq!(Functional::window(4, 0, 1).apply(&v), 1.5);
        assert!(Functional::new(vec![0.0, 0.0], "zero").is_err());
    }

    #[test]
    fn axis_basis_points_are_supports() {
        let basis = vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let sel = eim_points_for_basis(&basis).unwrap();
        assert_eq!(sel.indices, vec![2, 0, 1]);
        assert_eq!(lebesgue_constants(&sel.basis, &sel.b, 3).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn average_functional_on_rank_one() {
        let s = SnapshotMatrix::from_matrix(DenseMatrix::from_fn(4, 3, |i, j| (i as f64 + 1.0) * (j as f64 + 2.0))).unwrap();
        let sys = geim_greedy(&s, &[Functional::average(4)], &EimOptions::new(1e-10, Norm::L2)).unwrap();
        assert_eq!(sys.rank(), 1);
        let (_, v) = geim_interpolate(&sys, &s.snapshot(2)).unwrap();
        assert!((Functional::average(4).apply(&v) - Functional::average(4).apply(&s.snapshot(2))).abs() < 1e-14);
    }
}
