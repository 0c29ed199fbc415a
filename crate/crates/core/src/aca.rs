//! Adaptive cross approximation.
//!
//! The remainder update is always written as `r ← r − (u / p) ⊗ v` with
//! `u = r(:, j)`, `v = r(i, :)` and `p = r(i, j)`. The empirical
//! interpolation code performs the same operations in the same order, which
//! is what makes the two constructions agree bit for bit under global
//! pivoting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eim::Functional;
use crate::error::{contract, Error, Result};
use crate::kernels::{
    determinant, first_argmax, max_abs, norm2, solve_lower_triangular,
    solve_unit_lower_triangular, DenseMatrix, Lu,
};
use crate::sampling::{BivariateSource, EntrySource, Grid, SnapshotMatrix, TrivariateSource};
use crate::{Status, PIVOT_RTOL};

/// How partial pivoting picks the next row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowRule {
    /// Row where the previous column `u_{q-1}` is largest; row 0 first.
    Cyclic,
    /// A seeded random permutation of the rows.
    Random { seed: u64 },
    /// Nodes from the monomial construction on the row coordinates.
    NodeBased,
    /// A fixed row sequence; remaining rows follow in index order.
    Prescribed(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pivoting {
    /// Largest remainder entry overall.
    Global,
    /// Row by rule, then the largest entry in that row.
    Partial(RowRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcaOptions {
    pub tol: f64,
    pub pivoting: Pivoting,
    pub max_rank: Option<usize>,
}

impl AcaOptions {
    pub fn global(tol: f64) -> Self {
        Self {
            tol,
            pivoting: Pivoting::Global,
            max_rank: None,
        }
    }

    pub fn partial(tol: f64, rule: RowRule) -> Self {
        Self {
            tol,
            pivoting: Pivoting::Partial(rule),
            max_rank: None,
        }
    }

    pub fn with_max_rank(mut self, q: usize) -> Self {
        self.max_rank = Some(q);
        self
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")))
    }
}

/// Output of the cross approximation algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossApproximation {
    /// Row indices `i_1..i_Q`.
    pub tau: Vec<usize>,
    /// Column indices `j_1..j_Q`.
    pub sigma: Vec<usize>,
    /// `u_q = r_{q-1}(:, j_q)`.
    pub u: Vec<Vec<f64>>,
    /// `v_q = r_{q-1}(i_q, :)`.
    pub v: Vec<Vec<f64>>,
    /// `r_{q-1}(i_q, j_q)`.
    pub pivots: Vec<f64>,
    /// Bivariate runs: `‖r_k‖_max` after `k` terms. Matrix runs: the indicator of each term.
    pub history: Vec<f64>,
    pub status: Status,
}

impl CrossApproximation {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// `u_q / p_q`, the factor that multiplies `v_q` in the remainder update.
    pub fn scaled_u(&self, q: usize) -> Vec<f64> {
        let p = self.pivots[q];
        self.u[q].iter().map(|x| x / p).collect()
    }

    /// `Σ_q (u_q / p_q) v_qᵀ`.
    pub fn approximation(&self) -> DenseMatrix {
        let m = self.u.first().map_or(0, Vec::len);
        let n = self.v.first().map_or(0, Vec::len);
        let mut out = DenseMatrix::zeros(m, n);
        for q in 0..self.rank() {
            let us = self.scaled_u(q);
            for (i, a) in us.iter().enumerate() {
                for (o, b) in out.row_mut(i).iter_mut().zip(&self.v[q]) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Replays the first `q` remainder updates on `a`.
    pub fn remainder(&self, a: &DenseMatrix, q: usize) -> Result<DenseMatrix> {
        let m = self.u.first().map_or(a.rows(), Vec::len);
        let n = self.v.first().map_or(a.cols(), Vec::len);
        if a.shape() != (m, n) || q > self.rank() {
            return contract("remainder requested for a foreign matrix or beyond the rank");
        }
        let mut r = a.clone();
        for k in 0..q {
            subtract_cross(&mut r, &self.scaled_u(k), &self.v[k]);
        }
        Ok(r)
    }
}

pub(crate) fn subtract_cross(r: &mut DenseMatrix, us: &[f64], v: &[f64]) {
    for (i, a) in us.iter().enumerate() {
        for (x, b) in r.row_mut(i).iter_mut().zip(v) {
            *x -= a * b;
        }
    }
}

fn abs_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.abs()).collect()
}

/// Index of the first column with the largest `∞`-norm, then the first row attaining it there.
pub(crate) fn global_pivot(r: &DenseMatrix) -> (usize, usize) {
    let col_norms: Vec<f64> = (0..r.cols())
        .map(|j| (0..r.rows()).fold(0.0, |m, i| f64::max(m, r[(i, j)].abs())))
        .collect();
    let j = first_argmax(&col_norms).unwrap_or(0);
    let i = first_argmax(&abs_vec(&r.column(j))).unwrap_or(0);
    (i, j)
}

/// Rows in the order a rule proposes them; `None` for the adaptive cyclic rule.
fn fixed_row_order(rule: &RowRule, m: usize, coords: Option<&[f64]>) -> Result<Option<Vec<usize>>> {
    match rule {
        RowRule::Cyclic => Ok(None),
        RowRule::Random { seed } => {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            Ok(Some(order))
        }
        RowRule::NodeBased => {
            let coords = coords.ok_or_else(|| {
                Error::InvalidArgument("node-based row selection needs row coordinates".into())
            })?;
            let basis = monomial_basis(coords, m.min(40));
            let mut order = greedy_points(&basis).nodes;
            append_missing(&mut order, m);
            Ok(Some(order))
        }
        RowRule::Prescribed(rows) => {
            let mut seen = vec![false; m];
            for &i in rows {
                if i >= m || seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "prescribed row {i} is out of range or repeated"
                    )));
                }
                seen[i] = true;
            }
            let mut order = rows.clone();
            append_missing(&mut order, m);
            Ok(Some(order))
        }
    }
}

fn append_missing(order: &mut Vec<usize>, m: usize) {
    let mut seen = vec![false; m];
    order.iter().for_each(|&i| seen[i] = true);
    order.extend((0..m).filter(|&i| !seen[i]));
}

/// Candidate rows for the next step, best first.
fn candidate_rows(fixed: &Option<Vec<usize>>, last_u: Option<&[f64]>, skip: &[bool]) -> Vec<usize> {
    match (fixed, last_u) {
        (Some(order), _) => order.iter().copied().filter(|&i| !skip[i]).collect(),
        (None, None) => (0..skip.len()).filter(|&i| !skip[i]).collect(),
        (None, Some(u)) => {
            let mut rows: Vec<usize> = (0..skip.len()).filter(|&i| !skip[i]).collect();
            let best = first_argmax(&rows.iter().map(|&i| u[i].abs()).collect::<Vec<_>>());
            rows.sort_by(|&a, &b| u[b].abs().total_cmp(&u[a].abs()));
            if let Some(k) = best {
                // keep the tie rule of the shared argmax for the leading choice
                let lead = (0..skip.len()).filter(|&i| !skip[i]).nth(k).unwrap();
                rows.retain(|&i| i != lead);
                rows.insert(0, lead);
            }
            rows
        }
    }
}

/// Bivariate cross approximation of a snapshot matrix with the full remainder kept.
pub fn aca2_bivariate(s: &SnapshotMatrix, opts: &AcaOptions) -> Result<CrossApproximation> {
    aca2_dense(s.values(), Some(s.grid_x().points()), opts)
}

/// [`aca2_bivariate`] on a bare matrix; `coords` is only needed by the node-based rule.
pub fn aca2_dense(a: &DenseMatrix, coords: Option<&[f64]>, opts: &AcaOptions) -> Result<CrossApproximation> {
    check_tol(opts.tol)?;
    let (m, n) = a.shape();
    let max_rank = opts.max_rank.unwrap_or(m.min(n)).min(m.min(n));
    let thresh = PIVOT_RTOL * a.max_abs();
    let fixed = match &opts.pivoting {
        Pivoting::Global => None,
        Pivoting::Partial(rule) => fixed_row_order(rule, m, coords)?,
    };

    let mut r = a.clone();
    let mut out = CrossApproximation {
        tau: vec![],
        sigma: vec![],
        u: vec![],
        v: vec![],
        pivots: vec![],
        history: vec![],
        status: Status::NumericalRank,
    };
    let mut skip = vec![false; m];
    loop {
        let err = r.max_abs();
        out.history.push(err);
        if err < opts.tol {
            out.status = Status::ToleranceReached;
            break;
        }
        if out.rank() >= max_rank {
            out.status = if out.rank() < opts.max_rank.unwrap_or(usize::MAX) {
                Status::NumericalRank
            } else {
                Status::MaxRank
            };
            break;
        }
        let pivot = match &opts.pivoting {
            Pivoting::Global => {
                let (i, j) = global_pivot(&r);
                (r[(i, j)].abs() > thresh).then_some((i, j))
            }
            Pivoting::Partial(_) => {
                let last_u = out.u.last().map(Vec::as_slice);
                let mut found = None;
                for i in candidate_rows(&fixed, last_u, &skip) {
                    let j = first_argmax(&abs_vec(r.row(i))).unwrap_or(0);
                    if r[(i, j)].abs() > thresh {
                        found = Some((i, j));
                        break;
                    }
                    skip[i] = true;
                }
                found
            }
        };
        let Some((i, j)) = pivot else {
            out.status = Status::NumericalRank;
            break;
        };
        let p = r[(i, j)];
        let u = r.column(j);
        let v = r.row(i).to_vec();
        let us: Vec<f64> = u.iter().map(|x| x / p).collect();
        subtract_cross(&mut r, &us, &v);
        skip[i] = true;
        log::debug!("aca2 step {}: pivot ({i}, {j}) = {p:e}", out.rank() + 1);
        out.tau.push(i);
        out.sigma.push(j);
        out.u.push(u);
        out.v.push(v);
        out.pivots.push(p);
    }
    Ok(out)
}

/// Matrix cross approximation with partial pivoting that only touches single rows and columns.
///
/// Stops once `‖u_q‖ ‖v_q‖ / |p_q|` drops below the tolerance (that term is
/// kept) or no row with a nonzero remainder is left (a 0 is appended to the
/// history).
pub fn aca_matrix(src: &dyn EntrySource, opts: &AcaOptions) -> Result<CrossApproximation> {
    check_tol(opts.tol)?;
    let Pivoting::Partial(rule) = &opts.pivoting else {
        return Err(Error::InvalidArgument(
            "matrix cross approximation needs a row rule, not global pivoting".into(),
        ));
    };
    let (m, n) = src.shape();
    let coords = src.row_coordinates();
    let fixed = fixed_row_order(rule, m, coords.as_deref())?;
    let max_rank = opts.max_rank.unwrap_or(m.min(n)).min(m.min(n));

    let mut out = CrossApproximation {
        tau: vec![],
        sigma: vec![],
        u: vec![],
        v: vec![],
        pivots: vec![],
        history: vec![],
        status: Status::NumericalRank,
    };
    let mut scaled: Vec<Vec<f64>> = Vec::new();
    let mut skip = vec![false; m];
    let mut seen_max: f64 = 0.0;
    loop {
        if out.rank() >= max_rank {
            out.status = if out.rank() < opts.max_rank.unwrap_or(usize::MAX) {
                Status::NumericalRank
            } else {
                Status::MaxRank
            };
            break;
        }
        let last_u = out.u.last().map(Vec::as_slice);
        let mut found = None;
        for i in candidate_rows(&fixed, last_u, &skip) {
            let mut v = src.row(i);
            seen_max = seen_max.max(max_abs(&v));
            for (us, vl) in scaled.iter().zip(&out.v) {
                let c = us[i];
                v.iter_mut().zip(vl).for_each(|(x, b)| *x -= c * b);
            }
            skip[i] = true;
            let j = first_argmax(&abs_vec(&v)).unwrap_or(0);
            if v[j].abs() > PIVOT_RTOL * seen_max && v[j] != 0.0 {
                found = Some((i, j, v));
                break;
            }
        }
        let Some((i, j, v)) = found else {
            out.history.push(0.0);
            out.status = Status::NumericalRank;
            break;
        };
        let mut u = src.col(j);
        seen_max = seen_max.max(max_abs(&u));
        for (us, vl) in scaled.iter().zip(&out.v) {
            let c = vl[j];
            u.iter_mut().zip(us).for_each(|(x, a)| *x -= a * c);
        }
        let p = v[j];
        let indicator = norm2(&u) * norm2(&v) / p.abs();
        log::debug!("aca step {}: pivot ({i}, {j}) = {p:e}, indicator {indicator:e}", out.rank() + 1);
        scaled.push(u.iter().map(|x| x / p).collect());
        out.tau.push(i);
        out.sigma.push(j);
        out.u.push(u);
        out.v.push(v);
        out.pivots.push(p);
        out.history.push(indicator);
        if indicator < opts.tol {
            out.status = Status::ToleranceReached;
            break;
        }
    }
    Ok(out)
}

/// Evaluates `[f(x, y_σ)] M_Q⁻¹ [f(x_τ, y)]` through the triangular factors of the cross matrix.
#[derive(Debug, Clone)]
pub struct CrossInterpolant {
    pub tau: Vec<usize>,
    pub sigma: Vec<usize>,
    /// Unit lower factor, `L_{q,l} = u_l(x_q) / p_l`.
    lower: DenseMatrix,
    /// Transposed upper factor, `(Uᵀ)_{q,l} = v_l(y_q)`.
    upper_t: DenseMatrix,
}

pub fn cross_interpolant(ca: &CrossApproximation) -> Result<CrossInterpolant> {
    let q = ca.rank();
    if q == 0 {
        return Err(Error::InvalidArgument("empty cross approximation".into()));
    }
    let mut lower = DenseMatrix::identity(q);
    let mut upper_t = DenseMatrix::zeros(q, q);
    for a in 0..q {
        for l in 0..=a {
            if l < a {
                lower[(a, l)] = ca.u[l][ca.tau[a]] / ca.pivots[l];
            }
            upper_t[(a, l)] = ca.v[l][ca.sigma[a]];
        }
    }
    Ok(CrossInterpolant {
        tau: ca.tau.clone(),
        sigma: ca.sigma.clone(),
        lower,
        upper_t,
    })
}

impl CrossInterpolant {
    pub fn rank(&self) -> usize {
        self.tau.len()
    }

    /// `L⁻¹ [f(x_τ, y)]`, whose entries are `r_{q-1}(x_q, y)`.
    pub fn coefficients(&self, col_at_y: &[f64]) -> Result<Vec<f64>> {
        solve_unit_lower_triangular(&self.lower, col_at_y)
    }

    /// Interpolant from `f(x, y_σ)` and `f(x_τ, y)`.
    pub fn eval(&self, row_at_x: &[f64], col_at_y: &[f64]) -> Result<f64> {
        let c = self.coefficients(col_at_y)?;
        let d = solve_lower_triangular(&self.upper_t, row_at_x)?;
        Ok(d.iter().zip(&c).map(|(a, b)| a * b).sum())
    }

    /// Interpolant on every entry of a matrix.
    pub fn eval_matrix(&self, a: &dyn EntrySource) -> Result<DenseMatrix> {
        let (m, n) = a.shape();
        let ds = (0..m)
            .map(|i| {
                let row: Vec<f64> = self.sigma.iter().map(|&j| a.entry(i, j)).collect();
                solve_lower_triangular(&self.upper_t, &row)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = DenseMatrix::zeros(m, n);
        for j in 0..n {
            let col: Vec<f64> = self.tau.iter().map(|&i| a.entry(i, j)).collect();
            let c = self.coefficients(&col)?;
            for (i, d) in ds.iter().enumerate() {
                out[(i, j)] = d.iter().zip(&c).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }

    /// Interpolant of a function at an arbitrary point, with pivots located on the given grids.
    pub fn eval_source(&self, f: &dyn BivariateSource, gx: &Grid, gy: &Grid, x: f64, y: f64) -> Result<f64> {
        let row: Vec<f64> = self.sigma.iter().map(|&j| f.eval(x, gy.points()[j])).collect();
        let col: Vec<f64> = self.tau.iter().map(|&i| f.eval(gx.points()[i], y)).collect();
        self.eval(&row, &col)
    }
}

/// Monomials `t^k`, `k < count`, on the points mapped affinely onto `[-1, 1]`.
pub fn monomial_basis(points: &[f64], count: usize) -> Vec<Vec<f64>> {
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t: Vec<f64> = if hi > lo {
        points.iter().map(|&x| 2.0 * (x - lo) / (hi - lo) - 1.0).collect()
    } else {
        vec![0.0; points.len()]
    };
    (0..count)
        .map(|k| t.iter().map(|&x| x.powi(k as i32)).collect())
        .collect()
}

/// Greedy interpolation points for an ordered basis.
///
/// Each member is reduced by the previously selected normalized residuals,
/// `r ← r − r(x_p) h_p`, and its largest entry becomes the next point.
pub(crate) fn greedy_points(basis: &[Vec<f64>]) -> GreedyPoints {
    let mut nodes = Vec::new();
    let mut ells: Vec<Vec<f64>> = Vec::new();
    let mut hs: Vec<Vec<f64>> = Vec::new();
    for (q, w) in basis.iter().enumerate() {
        let mut r = w.clone();
        for (&x, h) in nodes.iter().zip(&hs) {
            let c: f64 = r[x];
            r.iter_mut().zip(h).for_each(|(a, b): (&mut f64, &f64)| *a -= c * b);
        }
        let x = first_argmax(&abs_vec(&r)).unwrap_or(0);
        if !(r[x].abs() > PIVOT_RTOL * max_abs(w)) {
            return GreedyPoints { nodes, ells, hs, dependent: Some(q) };
        }
        let p = r[x];
        hs.push(r.iter().map(|v| v / p).collect());
        ells.push(r);
        nodes.push(x);
    }
    GreedyPoints { nodes, ells, hs, dependent: None }
}

pub(crate) struct GreedyPoints {
    pub nodes: Vec<usize>,
    /// Residuals `ℓ_q`.
    pub ells: Vec<Vec<f64>>,
    /// `h_q = ℓ_q / ℓ_q(x_q)`.
    pub hs: Vec<Vec<f64>>,
    /// First member that reduced to zero.
    pub dependent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSystem {
    /// Grid indices `x_1..x_Q`.
    pub nodes: Vec<usize>,
    /// `ℓ_q` on the grid; `ℓ_q(x_p) = 0` for `p < q`.
    pub ell: Vec<Vec<f64>>,
    pub basis_tag: String,
}

/// Node construction for a linearly independent basis given on the grid.
pub fn build_nodes(basis: &[Vec<f64>], basis_tag: &str) -> Result<NodeSystem> {
    let m = basis.first().map_or(0, Vec::len);
    if basis.is_empty() || m == 0 || basis.iter().any(|w| w.len() != m) {
        return contract("basis vectors must be non-empty and of equal length");
    }
    let GreedyPoints { nodes, ells: ell, dependent, .. } = greedy_points(basis);
    if let Some(index) = dependent {
        return Err(Error::DependentBasis { index });
    }
    Ok(NodeSystem {
        nodes,
        ell,
        basis_tag: basis_tag.to_string(),
    })
}

fn cross_matrix(a: &DenseMatrix, tau: &[usize], sigma: &[usize]) -> Result<DenseMatrix> {
    if tau.len() != sigma.len() || tau.is_empty() {
        return contract("row and column index sets must be non-empty and equally long");
    }
    if tau.iter().any(|&i| i >= a.rows()) || sigma.iter().any(|&j| j >= a.cols()) {
        return contract("pivot index out of range");
    }
    Ok(a.select(tau, sigma))
}

/// `max_y ‖M_Q⁻¹ [f(x_τ, y)]‖₁` over the columns of `a`.
pub fn sigma2(a: &DenseMatrix, tau: &[usize], sigma: &[usize]) -> Result<f64> {
    let lu = Lu::factor(&cross_matrix(a, tau, sigma)?)?;
    let mut worst: f64 = 0.0;
    for j in 0..a.cols() {
        let b: Vec<f64> = tau.iter().map(|&i| a[(i, j)]).collect();
        worst = worst.max(lu.solve(&b)?.iter().map(|x| x.abs()).sum());
    }
    Ok(worst)
}

/// The x-side analogue `max_x ‖M_Q⁻ᵀ [f(x, y_σ)]‖₁`, reported as a diagnostic.
pub fn sigma1(a: &DenseMatrix, tau: &[usize], sigma: &[usize]) -> Result<f64> {
    sigma2(&a.transpose(), sigma, tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxVolumeReport {
    pub det: f64,
    /// `max_{q,y} |det M_q(y)| / |det M_Q|`; at most 1 when the condition holds.
    pub worst_ratio: f64,
    /// `(q, y)` attaining the worst ratio.
    pub worst: Option<(usize, usize)>,
    pub singular: bool,
    pub holds: bool,
}

/// Exhaustive check of `|det M_Q| ≥ |det M_q(y)|` over column replacements, for `Q ≤ 6`.
pub fn max_volume_check(a: &DenseMatrix, tau: &[usize], sigma: &[usize]) -> Result<MaxVolumeReport> {
    let mq = cross_matrix(a, tau, sigma)?;
    let q = tau.len();
    if q > 6 {
        return Err(Error::InvalidArgument(format!(
            "exhaustive volume check limited to 6 pivots, got {q}"
        )));
    }
    let det = determinant(&mq)?;
    let scale = a.max_abs().powi(q as i32);
    if det.abs() <= 1e-14 * scale {
        return Ok(MaxVolumeReport {
            det,
            worst_ratio: f64::INFINITY,
            worst: None,
            singular: true,
            holds: false,
        });
    }
    let mut worst_ratio: f64 = 0.0;
    let mut worst = None;
    for k in 0..q {
        for y in 0..a.cols() {
            let mut cols = sigma.to_vec();
            cols[k] = y;
            let ratio = determinant(&a.select(tau, &cols))?.abs() / det.abs();
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst = Some((k, y));
            }
        }
    }
    Ok(MaxVolumeReport {
        det,
        worst_ratio,
        worst,
        singular: false,
        holds: worst_ratio <= 1.0 + 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalOptions {
    pub tol: f64,
    pub max_rank: Option<usize>,
}

/// Cross approximation in which point evaluations are replaced by functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalCross {
    /// Indices into the x-side dictionary.
    pub phi: Vec<usize>,
    /// Indices into the y-side dictionary.
    pub psi: Vec<usize>,
    /// `⟨r_{q-1}(x, ·), ψ_q⟩` over the x grid.
    pub cols: Vec<Vec<f64>>,
    /// `⟨φ_q, r_{q-1}(·, y)⟩` over the y grid.
    pub rows: Vec<Vec<f64>>,
    pub pivots: Vec<f64>,
    /// `max |⟨φ_k, r ψ_l⟩|` after each step.
    pub history: Vec<f64>,
    pub status: Status,
    pub remainder: DenseMatrix,
}

impl FunctionalCross {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

/// Generalized cross approximation with x-side functionals `phi` and y-side functionals `psi`.
///
/// The pair `(φ_k, ψ_l)` maximizing `|⟨φ_k, r ψ_l⟩|` is selected with the same
/// column-then-row scan as global pivoting, so Dirac dictionaries reproduce
/// [`aca2_dense`] exactly.
pub fn aca_functional(
    a: &DenseMatrix,
    phi: &[Functional],
    psi: &[Functional],
    opts: &FunctionalOptions,
) -> Result<FunctionalCross> {
    check_tol(opts.tol)?;
    let (m, n) = a.shape();
    if phi.is_empty() || psi.is_empty() {
        return Err(Error::InvalidArgument("dictionaries must be non-empty".into()));
    }
    if phi.iter().any(|f| f.len() != m) || psi.iter().any(|f| f.len() != n) {
        return contract("functional lengths do not match the matrix");
    }
    let max_rank = opts.max_rank.unwrap_or(m.min(n)).min(m.min(n));
    let mut r = a.clone();
    let mut out = FunctionalCross {
        phi: vec![],
        psi: vec![],
        cols: vec![],
        rows: vec![],
        pivots: vec![],
        history: vec![],
        status: Status::NumericalRank,
        remainder: DenseMatrix::zeros(0, 0),
    };
    let mut thresh = None;
    loop {
        // r ψ_l over x, then the moment table T_{kl} = ⟨φ_k, r ψ_l⟩
        let r_psi: Vec<Vec<f64>> = psi
            .iter()
            .map(|f| (0..m).map(|i| f.apply(r.row(i))).collect())
            .collect();
        let t = DenseMatrix::from_fn(phi.len(), psi.len(), |k, l| phi[k].apply(&r_psi[l]));
        let err = t.max_abs();
        out.history.push(err);
        let thresh = *thresh.get_or_insert(PIVOT_RTOL * err);
        if err < opts.tol {
            out.status = Status::ToleranceReached;
            break;
        }
        if out.rank() >= max_rank {
            out.status = if out.rank() < opts.max_rank.unwrap_or(usize::MAX) {
                Status::NumericalRank
            } else {
                Status::MaxRank
            };
            break;
        }
        let (k, l) = global_pivot(&t);
        let p = t[(k, l)];
        if !(p.abs() > thresh) {
            out.status = Status::NumericalRank;
            break;
        }
        let col = r_psi[l].clone();
        let row: Vec<f64> = (0..n)
            .map(|j| phi[k].apply(&r.column(j)))
            .collect();
        let us: Vec<f64> = col.iter().map(|x| x / p).collect();
        subtract_cross(&mut r, &us, &row);
        out.phi.push(k);
        out.psi.push(l);
        out.cols.push(col);
        out.rows.push(row);
        out.pivots.push(p);
    }
    out.remainder = r;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivariateOptions {
    pub tol: f64,
    pub max_rank: Option<usize>,
}

/// Result of the three-variable cross approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivariateCross {
    /// Pivot triples `(x_q, y_q, z_q)` as grid indices.
    pub pivots: Vec<[usize; 3]>,
    pub pivot_values: Vec<f64>,
    /// `max |r_k|` after `k` steps.
    pub history: Vec<f64>,
    pub status: Status,
    pub dims: [usize; 3],
    /// Final remainder, `x` slowest and `z` fastest.
    pub remainder: Vec<f64>,
}

impl TrivariateCross {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn remainder_at(&self, i: usize, j: usize, k: usize) -> f64 {
        let [_, ny, nz] = self.dims;
        self.remainder[(i * ny + j) * nz + k]
    }
}

/// Three-variable cross approximation with the symmetric remainder update
/// `r ← r − r(x,y,z_q) r(x,y_q,z) r(x_q,y,z) p / (r(x,y_q,z_q) r(x_q,y,z_q) r(x_q,y_q,z))`.
///
/// Candidates are visited in order of decreasing `|r|`. A candidate is
/// admissible when every zero of its three fibers is matched by zero lines in
/// the two coordinate planes through the pivot that contain that fiber; the
/// update is then taken as 0 wherever its denominator vanishes.
pub fn aca_trivariate(src: &TrivariateSource, opts: &TrivariateOptions) -> Result<TrivariateCross> {
    check_tol(opts.tol)?;
    let dims = src.dims();
    let [nx, ny, nz] = dims;
    let idx = |i: usize, j: usize, k: usize| (i * ny + j) * nz + k;
    let mut r = src.tensor()?;
    let scale = max_abs(&r);
    let zero = 1e-12 * scale;
    let max_rank = opts.max_rank.unwrap_or(nx.min(ny).min(nz)).min(nx.min(ny).min(nz));
    let mut out = TrivariateCross {
        pivots: vec![],
        pivot_values: vec![],
        history: vec![],
        status: Status::NumericalRank,
        dims,
        remainder: vec![],
    };
    loop {
        let err = max_abs(&r);
        out.history.push(err);
        if err < opts.tol {
            out.status = Status::ToleranceReached;
            break;
        }
        if out.rank() >= max_rank {
            out.status = if out.rank() < opts.max_rank.unwrap_or(usize::MAX) {
                Status::NumericalRank
            } else {
                Status::MaxRank
            };
            break;
        }
        let mut order: Vec<usize> = (0..r.len()).filter(|&t| r[t].abs() > PIVOT_RTOL * scale).collect();
        order.sort_by(|&a, &b| r[b].abs().total_cmp(&r[a].abs()));
        let admissible = |xq: usize, yq: usize, zq: usize| -> bool {
            for x in 0..nx {
                if r[idx(x, yq, zq)].abs() <= zero
                    && ((0..ny).any(|y| r[idx(x, y, zq)].abs() > zero)
                        || (0..nz).any(|z| r[idx(x, yq, z)].abs() > zero))
                {
                    return false;
                }
            }
            for y in 0..ny {
                if r[idx(xq, y, zq)].abs() <= zero
                    && ((0..nx).any(|x| r[idx(x, y, zq)].abs() > zero)
                        || (0..nz).any(|z| r[idx(xq, y, z)].abs() > zero))
                {
                    return false;
                }
            }
            for z in 0..nz {
                if r[idx(xq, yq, z)].abs() <= zero
                    && ((0..nx).any(|x| r[idx(x, yq, z)].abs() > zero)
                        || (0..ny).any(|y| r[idx(xq, y, z)].abs() > zero))
                {
                    return false;
                }
            }
            true
        };
        let pick = order.into_iter().find_map(|t| {
            let (xq, rest) = (t / (ny * nz), t % (ny * nz));
            let (yq, zq) = (rest / nz, rest % nz);
            admissible(xq, yq, zq).then_some([xq, yq, zq])
        });
        let Some([xq, yq, zq]) = pick else {
            out.status = Status::NumericalRank;
            break;
        };
        let p = r[idx(xq, yq, zq)];
        let fa: Vec<f64> = (0..nx).map(|x| r[idx(x, yq, zq)]).collect();
        let fb: Vec<f64> = (0..ny).map(|y| r[idx(xq, y, zq)]).collect();
        let fc: Vec<f64> = (0..nz).map(|z| r[idx(xq, yq, z)]).collect();
        let plane_z: Vec<f64> = (0..nx * ny).map(|t| r[idx(t / ny, t % ny, zq)]).collect();
        let plane_y: Vec<f64> = (0..nx * nz).map(|t| r[idx(t / nz, yq, t % nz)]).collect();
        let plane_x: Vec<f64> = (0..ny * nz).map(|t| r[idx(xq, t / nz, t % nz)]).collect();
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    let (a, b, c) = (fa[x], fb[y], fc[z]);
                    if a.abs() <= zero || b.abs() <= zero || c.abs() <= zero {
                        continue;
                    }
                    let num = plane_z[x * ny + y] * plane_y[x * nz + z] * plane_x[y * nz + z] * p;
                    r[idx(x, y, z)] -= num / (a * b * c);
                }
            }
        }
        out.pivots.push([xq, yq, zq]);
        out.pivot_values.push(p);
    }
    out.remainder = r;
    Ok(out)
}
