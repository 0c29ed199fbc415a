//! Grids, function sources, snapshot matrices and CSV persistence.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::kernels::{dot, DenseMatrix};

/// Strictly increasing sample points together with the measure of the domain they cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
    measure: f64,
}

impl Grid {
    pub fn new(points: Vec<f64>, measure: f64) -> Result<Self> {
        if points.is_empty() {
            return contract("a grid needs at least one point");
        }
        if points.iter().any(|p| !p.is_finite()) {
            return contract("grid points must be finite");
        }
        if let Some(k) = points.windows(2).position(|w| w[0] >= w[1]) {
            return contract(format!("grid points not strictly increasing at index {}", k + 1));
        }
        if !(measure.is_finite() && measure > 0.0) {
            return contract(format!("domain measure must be positive, got {measure}"));
        }
        Ok(Self { points, measure })
    }

    /// Grid whose measure is the span of its points, or 1 for a single point.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        let measure = match points.as_slice() {
            [first, .., last] => last - first,
            _ => 1.0,
        };
        Self::new(points, measure)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// `m` equispaced points on `[a, b]` including both ends; a single point sits at the midpoint.
///
/// Points are generated from whichever end is closer so that grids on
/// symmetric intervals are exactly symmetric.
pub fn uniform_grid(a: f64, b: f64, m: usize) -> Result<Grid> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::InvalidArgument(format!(
            "interval [{a}, {b}] is empty or not finite"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("grid needs at least one point".into()));
    }
    if m == 1 {
        return Grid::new(vec![0.5 * (a + b)], b - a);
    }
    let last = (m - 1) as f64;
    let points = (0..m)
        .map(|i| {
            if 2 * i < m {
                a + (b - a) * (i as f64 / last)
            } else {
                b - (b - a) * ((m - 1 - i) as f64 / last)
            }
        })
        .collect();
    Grid::new(points, b - a)
}

/// A function of two variables sampled by the decomposition routines.
pub trait BivariateSource: Send + Sync {
    fn eval(&self, x: f64, y: f64) -> f64;

    /// Short description of the family, if it has a closed form.
    fn describe(&self) -> Option<String> {
        None
    }
}

/// Wraps a closure as a [`BivariateSource`].
pub struct FnSource<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Send + Sync> BivariateSource for FnSource<F> {
    fn eval(&self, x: f64, y: f64) -> f64 {
        (self.0)(x, y)
    }
}

/// Univariate factor of a separable family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Identity,
    Constant(f64),
    /// Coefficients in increasing degree.
    Polynomial(Vec<f64>),
    /// `exp(a t)`
    Exp(f64),
    /// `cos(w t)`
    Cos(f64),
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Profile::Identity => t,
            Profile::Constant(c) => *c,
            Profile::Polynomial(c) => horner(c, t),
            Profile::Exp(a) => (a * t).exp(),
            Profile::Cos(w) => (w * t).cos(),
        }
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

/// The built-in closed-form families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Family {
    /// `g(x) h(y)`
    Product { g: Profile, h: Profile },
    /// `Σ_k g_k(x) h_k(y)` with polynomial factors.
    RankK { g: Vec<Vec<f64>>, h: Vec<Vec<f64>> },
    /// `1 / (x + y + c)`
    Cauchy { c: f64 },
    /// `1 / (1 + x y)`
    Analytic,
    /// `exp(-|x - y|)`
    ExpAbs,
}

/// Parameters accepted by [`builtin_family`]; unused fields are ignored.
#[derive(Debug, Clone, Default)]
pub struct FamilyParams {
    pub c: Option<f64>,
    pub g: Option<Profile>,
    pub h: Option<Profile>,
    pub g_table: Vec<Vec<f64>>,
    pub h_table: Vec<Vec<f64>>,
}

pub const FAMILY_NAMES: [&str; 5] = ["product", "rank_k", "cauchy", "analytic", "exp_abs"];

pub fn builtin_family(name: &str, params: &FamilyParams) -> Result<Family> {
    match name {
        "product" => Ok(Family::Product {
            g: params.g.clone().unwrap_or(Profile::Identity),
            h: params.h.clone().unwrap_or(Profile::Identity),
        }),
        "rank_k" => {
            if params.g_table.len() != params.h_table.len() || params.g_table.is_empty() {
                return Err(Error::InvalidArgument(
                    "rank_k needs equally many non-empty g and h factor tables".into(),
                ));
            }
            Ok(Family::RankK {
                g: params.g_table.clone(),
                h: params.h_table.clone(),
            })
        }
        "cauchy" => {
            let c = params.c.unwrap_or(1.0);
            if !c.is_finite() {
                return Err(Error::InvalidArgument(format!("cauchy shift {c} is not finite")));
            }
            Ok(Family::Cauchy { c })
        }
        "analytic" => Ok(Family::Analytic),
        "exp_abs" => Ok(Family::ExpAbs),
        other => Err(Error::InvalidArgument(format!(
            "unknown family '{other}' (expected one of {})",
            FAMILY_NAMES.join(", ")
        ))),
    }
}

impl Family {
    /// Rejects grid boxes on which the family has a pole.
    pub fn check_domain(&self, gx: &Grid, gy: &Grid) -> Result<()> {
        let (lo, hi) = match self {
            Family::Cauchy { c } => (gx.first() + gy.first() + c, gx.last() + gy.last() + c),
            Family::Analytic => {
                let corners = [
                    gx.first() * gy.first(),
                    gx.first() * gy.last(),
                    gx.last() * gy.first(),
                    gx.last() * gy.last(),
                ];
                let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (1.0 + lo, 1.0 + hi)
            }
            _ => return Ok(()),
        };
        if lo <= 0.0 && hi >= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{} has a pole inside the sampled box",
                self.name()
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Product { .. } => "product",
            Family::RankK { .. } => "rank_k",
            Family::Cauchy { .. } => "cauchy",
            Family::Analytic => "analytic",
            Family::ExpAbs => "exp_abs",
        }
    }
}

impl BivariateSource for Family {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Family::Product { g, h } => g.eval(x) * h.eval(y),
            Family::RankK { g, h } => g
                .iter()
                .zip(h)
                .map(|(gk, hk)| horner(gk, x) * horner(hk, y))
                .sum(),
            Family::Cauchy { c } => 1.0 / (x + y + c),
            Family::Analytic => 1.0 / (1.0 + x * y),
            Family::ExpAbs => (-(x - y).abs()).exp(),
        }
    }

    fn describe(&self) -> Option<String> {
        Some(match self {
            Family::Cauchy { c } => format!("cauchy(c={c})"),
            other => other.name().to_string(),
        })
    }
}

/// Values `f(x_i, y_j)` on a tensor grid, columns indexed by the parameter `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMatrix {
    values: DenseMatrix,
    grid_x: Grid,
    grid_y: Grid,
    weight: f64,
}

impl SnapshotMatrix {
    /// Snapshot matrix with the quadrature weight `|Ω_x| / M`.
    pub fn new(values: DenseMatrix, grid_x: Grid, grid_y: Grid) -> Result<Self> {
        let weight = grid_x.measure() / grid_x.len() as f64;
        Self::with_weight(values, grid_x, grid_y, weight)
    }

    pub fn with_weight(values: DenseMatrix, grid_x: Grid, grid_y: Grid, weight: f64) -> Result<Self> {
        if values.rows() != grid_x.len() || values.cols() != grid_y.len() {
            return contract(format!(
                "{}x{} values do not match grids of sizes {} and {}",
                values.rows(),
                values.cols(),
                grid_x.len(),
                grid_y.len()
            ));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return contract(format!("weight must be positive, got {weight}"));
        }
        Ok(Self {
            values,
            grid_x,
            grid_y,
            weight,
        })
    }

    /// Wraps a bare matrix with uniform grids on `[0, 1]`.
    pub fn from_matrix(values: DenseMatrix) -> Result<Self> {
        let gx = unit_grid(values.rows())?;
        let gy = unit_grid(values.cols())?;
        Self::new(values, gx, gy)
    }

    /// Same data with the weight replaced by 1 (plain Euclidean products).
    pub fn unit_weight(mut self) -> Self {
        self.weight = 1.0;
        self
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn grid_x(&self) -> &Grid {
        &self.grid_x
    }

    pub fn grid_y(&self) -> &Grid {
        &self.grid_y
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Snapshot `f_{y_j}` as a vector over the x grid.
    pub fn snapshot(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    /// Discrete scalar product `weight · Σ v_i w_i`.
    pub fn inner(&self, v: &[f64], w: &[f64]) -> f64 {
        self.weight * dot(v, w)
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.inner(v, v).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.max_abs()
    }
}

fn unit_grid(n: usize) -> Result<Grid> {
    if n == 1 {
        Grid::new(vec![0.0], 1.0)
    } else {
        uniform_grid(0.0, 1.0, n)
    }
}

/// Samples `src` on the tensor grid `gx × gy`.
pub fn materialize(src: &dyn BivariateSource, gx: &Grid, gy: &Grid) -> Result<SnapshotMatrix> {
    let mut values = DenseMatrix::zeros(gx.len(), gy.len());
    for (i, &x) in gx.points().iter().enumerate() {
        for (j, &y) in gy.points().iter().enumerate() {
            let v = src.eval(x, y);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, y, value: v });
            }
            values[(i, j)] = v;
        }
    }
    SnapshotMatrix::new(values, gx.clone(), gy.clone())
}

/// Samples a built-in family after checking its domain.
pub fn materialize_family(family: &Family, gx: &Grid, gy: &Grid) -> Result<SnapshotMatrix> {
    family.check_domain(gx, gy)?;
    materialize(family, gx, gy)
}

/// Row/column access to a matrix that may never be formed in full.
pub trait EntrySource {
    fn shape(&self) -> (usize, usize);

    fn entry(&self, i: usize, j: usize) -> f64;

    fn row(&self, i: usize) -> Vec<f64> {
        (0..self.shape().1).map(|j| self.entry(i, j)).collect()
    }

    fn col(&self, j: usize) -> Vec<f64> {
        (0..self.shape().0).map(|i| self.entry(i, j)).collect()
    }

    /// Coordinates attached to the rows, used by node-based row selection.
    fn row_coordinates(&self) -> Option<Vec<f64>> {
        None
    }
}

impl EntrySource for DenseMatrix {
    fn shape(&self) -> (usize, usize) {
        DenseMatrix::shape(self)
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self[(i, j)]
    }

    fn row(&self, i: usize) -> Vec<f64> {
        DenseMatrix::row(self, i).to_vec()
    }
}

impl EntrySource for SnapshotMatrix {
    fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).to_vec()
    }

    fn row_coordinates(&self) -> Option<Vec<f64>> {
        Some(self.grid_x.points().to_vec())
    }
}

/// A bivariate source evaluated lazily on two grids.
pub struct GridSource<'a> {
    pub source: &'a dyn BivariateSource,
    pub grid_x: &'a Grid,
    pub grid_y: &'a Grid,
}

impl EntrySource for GridSource<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.grid_x.len(), self.grid_y.len())
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.source
            .eval(self.grid_x.points()[i], self.grid_y.points()[j])
    }

    fn row_coordinates(&self) -> Option<Vec<f64>> {
        Some(self.grid_x.points().to_vec())
    }
}

type TrivariateFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// A function of three variables on three grids.
#[derive(Clone)]
pub struct TrivariateSource {
    f: Arc<TrivariateFn>,
    grids: [Grid; 3],
}

impl TrivariateSource {
    pub fn new(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static, gx: Grid, gy: Grid, gz: Grid) -> Self {
        Self {
            f: Arc::new(f),
            grids: [gx, gy, gz],
        }
    }

    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        (self.f)(x, y, z)
    }

    pub fn grids(&self) -> &[Grid; 3] {
        &self.grids
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.grids[0].len(), self.grids[1].len(), self.grids[2].len()]
    }

    /// All grid values, `x` slowest and `z` fastest.
    pub fn tensor(&self) -> Result<Vec<f64>> {
        let [gx, gy, gz] = &self.grids;
        let mut out = Vec::with_capacity(gx.len() * gy.len() * gz.len());
        for &x in gx.points() {
            for &y in gy.points() {
                for &z in gz.points() {
                    let v = self.eval(x, y, z);
                    if !v.is_finite() {
                        return Err(Error::NonFinite { x, y, value: v });
                    }
                    out.push(v);
                }
            }
        }
        Ok(out)
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Serializes a snapshot matrix, including grids and domain measures.
pub fn format_matrix_csv(s: &SnapshotMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#measure_x:{}", format_f64(s.grid_x.measure()));
    let _ = writeln!(out, "#measure_y:{}", format_f64(s.grid_y.measure()));
    let ys: Vec<String> = s.grid_y.points().iter().map(|&y| format_f64(y)).collect();
    let _ = writeln!(out, "#y:{}", ys.join(","));
    for i in 0..s.rows() {
        let _ = write!(out, "#x:{}", format_f64(s.grid_x.points()[i]));
        for &v in s.values.row(i) {
            let _ = write!(out, ",{}", format_f64(v));
        }
        out.push('\n');
    }
    out
}

fn parse_cell(text: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| Error::Parse {
        row,
        col,
        msg: format!("'{}' is not a number", text.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            col,
            msg: format!("'{}' is not finite", text.trim()),
        });
    }
    Ok(v)
}

/// Parses the CSV matrix format. Positions in errors are 1-based.
///
/// Lines may be `#measure_x:<v>`, `#measure_y:<v>`, a `#y:<y1>,<y2>,...`
/// header, or data rows whose first cell is optionally `#x:<xi>`.
/// Missing grids default to uniform points on `[0, 1]`.
pub fn parse_matrix_csv(text: &str) -> Result<SnapshotMatrix> {
    let mut measure_x = None;
    let mut measure_y = None;
    let mut ys: Option<Vec<f64>> = None;
    let mut xs: Vec<Option<f64>> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();

    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#measure_x:") {
            measure_x = Some(parse_cell(rest, lineno, 1)?);
            continue;
        }
        if let Some(rest) = line.strip_prefix("#measure_y:") {
            measure_y = Some(parse_cell(rest, lineno, 1)?);
            continue;
        }
        if let Some(rest) = line.strip_prefix("#y:") {
            ys = Some(
                rest.split(',')
                    .enumerate()
                    .map(|(c, cell)| parse_cell(cell, lineno, c + 1))
                    .collect::<Result<_>>()?,
            );
            continue;
        }
        let mut cells = line.split(',').enumerate().peekable();
        let mut x = None;
        if let Some((_, first)) = cells.peek() {
            if let Some(xv) = first.trim().strip_prefix("#x:") {
                x = Some(parse_cell(xv, lineno, 1)?);
                cells.next();
            }
        }
        let row = cells
            .map(|(c, cell)| parse_cell(cell, lineno, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    row: lineno,
                    col: row.len().min(first.len()) + 1,
                    msg: format!("expected {} values, found {}", first.len(), row.len()),
                });
            }
        }
        xs.push(x);
        rows.push(row);
    }

    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            msg: "no data rows".into(),
        });
    }
    let values = DenseMatrix::from_rows(&rows)?;
    let (m, n) = values.shape();

    let grid_x = if xs.iter().all(Option::is_some) {
        let pts: Vec<f64> = xs.into_iter().flatten().collect();
        grid_with_measure(pts, measure_x)?
    } else if xs.iter().any(Option::is_some) {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            msg: "'#x:' labels must be given on every row or on none".into(),
        });
    } else {
        default_grid(m, measure_x)?
    };
    let grid_y = match ys {
        Some(pts) if pts.len() != n => {
            return Err(Error::Parse {
                row: 1,
                col: pts.len().min(n) + 1,
                msg: format!("'#y:' header has {} entries for {} columns", pts.len(), n),
            })
        }
        Some(pts) => grid_with_measure(pts, measure_y)?,
        None => default_grid(n, measure_y)?,
    };
    SnapshotMatrix::new(values, grid_x, grid_y)
}

fn grid_with_measure(points: Vec<f64>, measure: Option<f64>) -> Result<Grid> {
    match measure {
        Some(m) => Grid::new(points, m),
        None => Grid::from_points(points),
    }
}

fn default_grid(n: usize, measure: Option<f64>) -> Result<Grid> {
    let g = unit_grid(n)?;
    match measure {
        Some(m) => Grid::new(g.points().to_vec(), m),
        None => Ok(g),
    }
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<SnapshotMatrix> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

pub fn write_matrix_csv(s: &SnapshotMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), format_matrix_csv(s).as_bytes())
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
