//! Gappy POD: projection onto a basis from incomplete data, greedy sensor
//! placement and the generalized degrees-of-freedom formulation.

use serde::{Deserialize, Serialize};

use crate::eim::{eim_greedy, EimOptions, EimSystem, Functional, Norm};
use crate::error::{contract, Error, Result};
use crate::kernels::{cond2, dot, first_argmax, first_argmin, DenseMatrix, Lu};
use crate::sampling::SnapshotMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensors {
    /// Grid indices where the data is sampled.
    Nodal(Vec<usize>),
    /// Degrees of freedom given by functionals on the grid.
    Generalized(Vec<Functional>),
}

impl Sensors {
    pub fn len(&self) -> usize {
        match self {
            Sensors::Nodal(s) => s.len(),
            Sensors::Generalized(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Sensors::Nodal(s) => s.iter().map(|&i| v[i]).collect(),
            Sensors::Generalized(f) => f.iter().map(|g| g.apply(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GappySystem {
    pub basis: Vec<Vec<f64>>,
    pub sensors: Sensors,
    /// Mass matrix of the selected degrees of freedom, `(φ_l, φ_k)`.
    pub metric: DenseMatrix,
    /// `M / L`.
    pub prefactor: f64,
    /// `(M_{h,L})_{ij} = (h_j, h_i)_L`.
    pub gram: DenseMatrix,
    pub gram_cond: f64,
}

/// `Σ_l a_l (G b)_l` with the inner sums taken over the nonzero entries of `G` only.
fn metric_product(g: &DenseMatrix, a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for (l, al) in a.iter().enumerate() {
        let row = g.row(l);
        let mut gb: Option<f64> = None;
        for (k, &w) in row.iter().enumerate() {
            if w != 0.0 {
                let t = w * b[k];
                gb = Some(gb.map_or(t, |acc| acc + t));
            }
        }
        total += al * gb.unwrap_or(0.0);
    }
    total
}

fn check_basis(basis: &[Vec<f64>]) -> Result<usize> {
    let m = basis.first().map_or(0, Vec::len);
    if basis.is_empty() || m == 0 || basis.iter().any(|h| h.len() != m) {
        return contract("basis vectors must be non-empty and of equal length");
    }
    Ok(m)
}

fn check_nodal(sensors: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    for &i in sensors {
        if i >= m {
            return contract(format!("sensor {i} outside a grid of {m} points"));
        }
        if seen[i] {
            return Err(Error::InvalidArgument(format!("sensor {i} repeated")));
        }
        seen[i] = true;
    }
    if sensors.is_empty() {
        return Err(Error::InvalidArgument("at least one sensor is needed".into()));
    }
    Ok(())
}

impl GappySystem {
    fn assemble(basis: Vec<Vec<f64>>, sensors: Sensors, metric: DenseMatrix, prefactor: f64) -> Result<Self> {
        let moments: Vec<Vec<f64>> = basis.iter().map(|h| sensors.apply(h)).collect();
        let q = basis.len();
        let gram = DenseMatrix::from_fn(q, q, |i, j| prefactor * metric_product(&metric, &moments[i], &moments[j]));
        let gram_cond = if gram.max_abs() == 0.0 {
            f64::INFINITY
        } else {
            cond2(&gram)?
        };
        Ok(Self {
            basis,
            sensors,
            metric,
            prefactor,
            gram,
            gram_cond,
        })
    }

    /// Point sensors with the gappy product `(|Ω|/L) Σ v(x_l) w(x_l)`.
    pub fn nodal(basis: &[Vec<f64>], sensors: &[usize], measure: f64) -> Result<Self> {
        let m = check_basis(basis)?;
        check_nodal(sensors, m)?;
        let l = sensors.len();
        let metric = DenseMatrix::identity(l).scaled(measure / m as f64);
        Self::assemble(basis.to_vec(), Sensors::Nodal(sensors.to_vec()), metric, m as f64 / l as f64)
    }

    /// Functional degrees of freedom with mass matrix `metric = ((φ_l, φ_k))`.
    pub fn generalized(basis: &[Vec<f64>], functionals: &[Functional], metric: &DenseMatrix) -> Result<Self> {
        let m = check_basis(basis)?;
        let l = functionals.len();
        if l == 0 {
            return Err(Error::InvalidArgument("at least one functional is needed".into()));
        }
        if functionals.iter().any(|f| f.len() != m) {
            return contract("functionals do not match the basis grid");
        }
        if metric.shape() != (l, l) {
            return contract(format!("metric must be {l}x{l}"));
        }
        for i in 0..l {
            for k in 0..i {
                if (metric[(i, k)] - metric[(k, i)]).abs() > 1e-12 * metric.max_abs() {
                    return contract("metric is not symmetric");
                }
            }
        }
        Self::assemble(
            basis.to_vec(),
            Sensors::Generalized(functionals.to_vec()),
            metric.clone(),
            m as f64 / l as f64,
        )
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Sensor data of a full-grid vector.
    pub fn measure(&self, f: &[f64]) -> Vec<f64> {
        self.sensors.apply(f)
    }
}

pub fn gappy_gram(basis: &[Vec<f64>], sensors: &[usize], measure: f64) -> Result<DenseMatrix> {
    Ok(GappySystem::nodal(basis, sensors, measure)?.gram)
}

/// Solves the gappy normal equations for sensor data; returns coefficients and the full-grid reconstruction.
pub fn gappy_project(sys: &GappySystem, data: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if data.len() != sys.sensors.len() {
        return contract(format!("{} values for {} sensors", data.len(), sys.sensors.len()));
    }
    if !sys.gram_cond.is_finite() {
        return Err(Error::Singular("insufficient sensors for basis".into()));
    }
    let rhs: Vec<f64> = sys
        .basis
        .iter()
        .map(|h| sys.prefactor * metric_product(&sys.metric, &sys.sensors.apply(h), data))
        .collect();
    let coeffs = Lu::factor(&sys.gram)
        .map_err(|_| Error::Singular("insufficient sensors for basis".into()))?
        .solve(&rhs)?;
    let m = sys.basis[0].len();
    let mut recon = vec![0.0; m];
    for (c, h) in coeffs.iter().zip(&sys.basis) {
        recon.iter_mut().zip(h).for_each(|(r, v)| *r += c * v);
    }
    Ok((coeffs, recon))
}

/// Coefficients of the gappy projection from functional degrees of freedom.
pub fn gappy_generalized_project(
    basis: &[Vec<f64>],
    functionals: &[Functional],
    metric: &DenseMatrix,
    dofs: &[f64],
) -> Result<Vec<f64>> {
    let sys = GappySystem::generalized(basis, functionals, metric)?;
    Ok(gappy_project(&sys, dofs)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPlacement {
    pub sensors: Vec<usize>,
    /// Condition numbers (`cond` criterion) or worst training errors (`error` criterion), per step.
    pub history: Vec<f64>,
}

fn nodal_cond(basis: &[Vec<f64>], sensors: &[usize], measure: f64) -> Result<f64> {
    Ok(GappySystem::nodal(basis, sensors, measure)?.gram_cond)
}

/// Greedy placement of `l_total` sensors minimizing the Gram condition number.
pub fn place_sensors_cond(basis: &[Vec<f64>], measure: f64, l_total: usize) -> Result<SensorPlacement> {
    extend_sensors_cond(basis, measure, &[], l_total)
}

/// Continues the condition-number greedy from an existing sensor set up to `l_total` sensors.
///
/// Step `l` uses the first `min(Q, l)` basis vectors. For the very first
/// sensor every nonzero point gives condition number 1; the point with the
/// largest `|h_1|` is taken.
pub fn extend_sensors_cond(
    basis: &[Vec<f64>],
    measure: f64,
    initial: &[usize],
    l_total: usize,
) -> Result<SensorPlacement> {
    let m = check_basis(basis)?;
    if l_total > m {
        return Err(Error::InvalidArgument(format!(
            "{l_total} sensors requested on a grid of {m} points"
        )));
    }
    if l_total == 0 {
        return Err(Error::InvalidArgument("at least one sensor is needed".into()));
    }
    let q_all = basis.len();
    let mut sensors = initial.to_vec();
    let mut history = Vec::new();
    if !sensors.is_empty() {
        check_nodal(&sensors, m)?;
        history.push(nodal_cond(&basis[..q_all.min(sensors.len())], &sensors, measure)?);
    }
    let mut used = vec![false; m];
    sensors.iter().for_each(|&i| used[i] = true);
    while sensors.len() < l_total {
        let l = sensors.len() + 1;
        let q = q_all.min(l);
        let candidates: Vec<usize> = (0..m).filter(|&x| !used[x]).collect();
        let pick = if l == 1 {
            let mag: Vec<f64> = candidates.iter().map(|&x| basis[0][x].abs()).collect();
            candidates[first_argmax(&mag).unwrap_or(0)]
        } else {
            let mut kappas = Vec::with_capacity(candidates.len());
            for &x in &candidates {
                let mut trial = sensors.clone();
                trial.push(x);
                kappas.push(nodal_cond(&basis[..q], &trial, measure)?);
            }
            candidates[first_argmin(&kappas).unwrap_or(0)]
        };
        sensors.push(pick);
        used[pick] = true;
        history.push(nodal_cond(&basis[..q], &sensors, measure)?);
    }
    Ok(SensorPlacement { sensors, history })
}

/// Worst training error of the gappy projection with the given sensors and basis prefix.
fn worst_residual(
    basis: &[Vec<f64>],
    s: &SnapshotMatrix,
    sensors: &[usize],
    norm: Norm,
) -> Result<(f64, usize, Vec<f64>)> {
    let sys = if basis.is_empty() {
        None
    } else {
        Some(GappySystem::nodal(basis, sensors, s.grid_x().measure())?)
    };
    let mut worst = (f64::NEG_INFINITY, 0, Vec::new());
    for j in 0..s.cols() {
        let f = s.snapshot(j);
        let r: Vec<f64> = match &sys {
            None => f,
            Some(sys) => {
                let (_, rec) = gappy_project(sys, &sys.measure(&f))?;
                f.iter().zip(&rec).map(|(a, b)| a - b).collect()
            }
        };
        let e = norm.eval(&r, s.weight());
        if e > worst.0 {
            worst = (e, j, r);
        }
    }
    Ok(worst)
}

/// Greedy placement of `l_total` sensors at the largest residual of the worst training snapshot.
///
/// Before sensor `l` the projection uses the first `min(Q, l − 1)` basis
/// vectors on the sensors chosen so far; candidates that would make the next
/// Gram matrix singular are passed over. The history holds the worst error
/// before each step followed by the final one.
pub fn place_sensors_error(
    basis: &[Vec<f64>],
    s: &SnapshotMatrix,
    l_total: usize,
    norm: Norm,
) -> Result<SensorPlacement> {
    let m = check_basis(basis)?;
    if m != s.rows() {
        return contract("basis and snapshots live on different grids");
    }
    if l_total == 0 || l_total > m {
        return Err(Error::InvalidArgument(format!(
            "{l_total} sensors requested on a grid of {m} points"
        )));
    }
    let q_all = basis.len();
    let measure = s.grid_x().measure();
    let mut sensors: Vec<usize> = Vec::new();
    let mut used = vec![false; m];
    let mut history = Vec::new();
    for l in 1..=l_total {
        let q_prev = q_all.min(l - 1);
        let (err, _, r) = worst_residual(&basis[..q_prev], s, &sensors, norm)?;
        history.push(err);
        let q_next = q_all.min(l);
        let mut candidates: Vec<usize> = (0..m).filter(|&x| !used[x]).collect();
        candidates.sort_by(|&a, &b| r[b].abs().total_cmp(&r[a].abs()));
        let mut chosen = None;
        for x in candidates {
            let mut trial = sensors.clone();
            trial.push(x);
            if nodal_cond(&basis[..q_next], &trial, measure)?.is_finite() {
                chosen = Some(x);
                break;
            }
        }
        let x = chosen.ok_or_else(|| Error::Singular(format!("no admissible sensor at step {l}")))?;
        sensors.push(x);
        used[x] = true;
    }
    let (err, _, _) = worst_residual(&basis[..q_all.min(l_total)], s, &sensors, norm)?;
    history.push(err);
    Ok(SensorPlacement { sensors, history })
}

#[derive(Debug, Clone)]
pub struct StabilizedSystem {
    pub eim: EimSystem,
    /// Gappy system on the orthonormalized EIM basis.
    pub system: GappySystem,
    /// Gram condition number with the EIM points, then after each added sensor.
    pub kappa_history: Vec<f64>,
}

/// Nested Gram-Schmidt (twice) in the weighted product; every prefix keeps its span.
fn orthonormalize(basis: &[Vec<f64>], weight: f64) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    for (k, h) in basis.iter().enumerate() {
        let mut v = h.clone();
        for _ in 0..2 {
            for e in &out {
                let c = weight * dot(&v, e);
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = (weight * dot(&v, &v)).sqrt();
        if !(n > 1e-12 * (weight * dot(h, h)).sqrt()) {
            return Err(Error::DependentBasis { index: k });
        }
        out.push(v.iter().map(|a| a / n).collect());
    }
    Ok(out)
}

/// Runs EIM, seeds the sensors with its interpolation points and adds `extra`
/// sensors by the condition-number greedy.
///
/// The greedy works on an orthonormal basis of the EIM spaces: the gappy
/// projection only depends on the span, and with an orthonormal basis the
/// Gram condition number measures the projection rather than the scaling of
/// `h_q`.
pub fn eim_then_stabilize(s: &SnapshotMatrix, tol: f64, extra: usize, norm: Norm) -> Result<StabilizedSystem> {
    let eim = eim_greedy(s, &EimOptions::new(tol, norm))?;
    if eim.rank() == 0 {
        return Err(Error::InvalidArgument("interpolation produced no basis".into()));
    }
    let measure = s.grid_x().measure();
    let total = eim.rank() + extra;
    if total > s.rows() {
        return Err(Error::InvalidArgument(format!(
            "{extra} extra sensors do not fit on a grid of {} points",
            s.rows()
        )));
    }
    let basis = orthonormalize(&eim.basis, s.weight())?;
    let placement = extend_sensors_cond(&basis, measure, &eim.interp_indices, total)?;
    let system = GappySystem::nodal(&basis, &placement.sensors, measure)?;
    Ok(StabilizedSystem {
        eim,
        system,
        kappa_history: placement.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]
    }

    #[test]
    fn gram_of_axis_vectors() {
        let g = gappy_gram(&axes(), &[0, 1], 1.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 0.5 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-15);
            }
        }
        let g = gappy_gram(&[vec![1.0, 0.3]], &[0], 2.0).unwrap();
        assert!((g[(0, 0)] - 2.0).abs() < 1e-15);
        assert!(gappy_gram(&axes(), &[0, 0], 1.0).is_err());
    }

    #[test]
    fn projection_of_axis_data() {
        let sys = GappySystem::nodal(&axes(), &[0, 1], 1.0).unwrap();
        let (c, rec) = gappy_project(&sys, &[3.0, 4.0]).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-14 && (c[1] - 4.0).abs() < 1e-14);
        assert!((rec[0] - 3.0).abs() < 1e-14 && (rec[1] - 4.0).abs() < 1e-14 && rec[2] == 0.0);
    }

    #[test]
    fn too_few_sensors_is_singular() {
        let sys = GappySystem::nodal(&axes(), &[2], 1.0).unwrap();
        assert!(!sys.gram_cond.is_finite());
        assert!(matches!(gappy_project(&sys, &[1.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn first_sensor_goes_to_largest_entry() {
        let basis = vec![vec![0.2, -0.9, 0.9, 0.1]];
        let p = place_sensors_cond(&basis, 1.0, 1).unwrap();
        assert_eq!(p.sensors, vec![1]);
        assert_eq!(p.history, vec![1.0]);
        assert!(place_sensors_cond(&basis, 1.0, 5).is_err());
    }

    #[test]
    fn average_dof_recovers_rank_one() {
        let h = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let f: Vec<f64> = h[0].iter().map(|v| 2.5 * v).collect();
        let avg = Functional::average(4);
        let c = gappy_generalized_project(&h, std::slice::from_ref(&avg), &DenseMatrix::identity(1), &[avg.apply(&f)]).unwrap();
        assert!((c[0] - 2.5).abs() < 1e-14);
    }
}
