//! Python bindings. Vectors and matrices cross the boundary as lists of floats.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lowrank::aca::{aca2_bivariate, aca_matrix, AcaOptions, CrossApproximation, RowRule};
use lowrank::eim::{eim_greedy, eim_interpolate, EimOptions, EimSystem, Norm};
use lowrank::gappy::{gappy_project, place_sensors_cond, place_sensors_error, GappySystem};
use lowrank::pod::{pod_basis, pod_error, pod_project, PodBasis, Truncation};
use lowrank::sampling::{builtin_family, materialize_family, read_matrix_csv, uniform_grid, write_matrix_csv, FamilyParams, Grid};
use lowrank::verify::{check_equivalence_aca_eim, decay_report, nwidth_oracle, DecayMethod};
use lowrank::{DenseMatrix, Error, SnapshotMatrix, Status};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::Singular(_) | Error::NonFinite { .. } | Error::DependentBasis { .. } => {
            PyArithmeticError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::ToleranceReached => "tolerance_reached",
        Status::NumericalRank => "numerical_rank",
        Status::MaxRank => "max_rank",
    }
}

fn norm(p: &str) -> PyResult<Norm> {
    p.parse().map_err(err)
}

/// Sampled family: rows are x grid points, columns are parameters.
#[pyclass(name = "SnapshotMatrix", module = "lowrank_py", frozen)]
struct PySnapshots {
    inner: SnapshotMatrix,
}

#[pymethods]
impl PySnapshots {
    /// Values given row by row; grids default to uniform points on [0, 1].
    #[new]
    #[pyo3(signature = (rows, x=None, y=None, unit_weight=false))]
    fn new(rows: Vec<Vec<f64>>, x: Option<Vec<f64>>, y: Option<Vec<f64>>, unit_weight: bool) -> PyResult<Self> {
        let values = DenseMatrix::from_rows(&rows).map_err(err)?;
        let (m, n) = values.shape();
        let grid = |pts: Option<Vec<f64>>, k: usize| match pts {
            Some(p) => Grid::from_points(p),
            None => uniform_grid(0.0, 1.0, k),
        };
        let s = SnapshotMatrix::new(values, grid(x, m).map_err(err)?, grid(y, n).map_err(err)?).map_err(err)?;
        Ok(Self {
            inner: if unit_weight { s.unit_weight() } else { s },
        })
    }

    /// Built-in family sampled on uniform grids over [0, 1].
    #[staticmethod]
    #[pyo3(signature = (name, mx=20, ny=20, c=None))]
    fn family(name: &str, mx: usize, ny: usize, c: Option<f64>) -> PyResult<Self> {
        let fam = builtin_family(name, &FamilyParams { c, ..Default::default() }).map_err(err)?;
        let gx = uniform_grid(0.0, 1.0, mx).map_err(err)?;
        let gy = uniform_grid(0.0, 1.0, ny).map_err(err)?;
        Ok(Self {
            inner: materialize_family(&fam, &gx, &gy).map_err(err)?,
        })
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: read_matrix_csv(path).map_err(err)?,
        })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        write_matrix_csv(&self.inner, path).map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.values().shape()
    }

    #[getter]
    fn weight(&self) -> f64 {
        self.inner.weight()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.grid_x().points().to_vec()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.grid_y().points().to_vec()
    }

    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values().to_rows()
    }

    fn snapshot(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.cols() {
            return Err(PyValueError::new_err(format!("snapshot {j} out of range")));
        }
        Ok(self.inner.snapshot(j))
    }

    fn __repr__(&self) -> String {
        let (m, n) = self.shape();
        format!("SnapshotMatrix({m}x{n}, weight={})", self.inner.weight())
    }
}

#[pyclass(name = "Pod", module = "lowrank_py", frozen)]
struct PyPod {
    inner: PodBasis,
}

#[pymethods]
impl PyPod {
    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    #[getter]
    fn basis(&self) -> Vec<Vec<f64>> {
        self.inner.basis.clone()
    }

    #[getter]
    fn trailing_error(&self) -> f64 {
        self.inner.trailing_error()
    }

    /// Coefficients and reconstruction of `f`.
    fn project(&self, f: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        pod_project(&self.inner, &f).map_err(err)
    }

    /// Mean-square projection error over the snapshots.
    fn error(&self, s: &PySnapshots) -> PyResult<f64> {
        pod_error(&s.inner, &self.inner).map_err(err)
    }
}

#[pyclass(name = "Cross", module = "lowrank_py", frozen)]
struct PyCross {
    inner: CrossApproximation,
}

#[pymethods]
impl PyCross {
    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn rows(&self) -> Vec<usize> {
        self.inner.tau.clone()
    }

    #[getter]
    fn cols(&self) -> Vec<usize> {
        self.inner.sigma.clone()
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        self.inner.u.clone()
    }

    #[getter]
    fn v(&self) -> Vec<Vec<f64>> {
        self.inner.v.clone()
    }

    #[getter]
    fn pivots(&self) -> Vec<f64> {
        self.inner.pivots.clone()
    }

    #[getter]
    fn history(&self) -> Vec<f64> {
        self.inner.history.clone()
    }

    #[getter]
    fn status(&self) -> &'static str {
        status_name(self.inner.status)
    }

    /// The rank-Q matrix as rows.
    fn approximation(&self) -> Vec<Vec<f64>> {
        self.inner.approximation().to_rows()
    }
}

#[pyclass(name = "Eim", module = "lowrank_py", frozen)]
struct PyEim {
    inner: EimSystem,
}

#[pymethods]
impl PyEim {
    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn points(&self) -> Vec<usize> {
        self.inner.interp_indices.clone()
    }

    #[getter]
    fn parameters(&self) -> Vec<usize> {
        self.inner.sample_indices.clone()
    }

    #[getter]
    fn basis(&self) -> Vec<Vec<f64>> {
        self.inner.basis.clone()
    }

    #[getter]
    fn b(&self) -> Vec<Vec<f64>> {
        self.inner.b.to_rows()
    }

    #[getter]
    fn history(&self) -> Vec<f64> {
        self.inner.history.clone()
    }

    #[getter]
    fn status(&self) -> &'static str {
        status_name(self.inner.status)
    }

    /// Coefficients and interpolant of `f`, which is given on the whole grid.
    fn interpolate(&self, f: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        eim_interpolate(&self.inner, &f).map_err(err)
    }
}

#[pyclass(name = "Gappy", module = "lowrank_py", frozen)]
struct PyGappy {
    inner: GappySystem,
}

#[pymethods]
impl PyGappy {
    /// Point sensors on the grid of `basis`; `measure` is the size of the x domain.
    #[new]
    #[pyo3(signature = (basis, sensors, measure=1.0))]
    fn new(basis: Vec<Vec<f64>>, sensors: Vec<usize>, measure: f64) -> PyResult<Self> {
        Ok(Self {
            inner: GappySystem::nodal(&basis, &sensors, measure).map_err(err)?,
        })
    }

    #[getter]
    fn gram(&self) -> Vec<Vec<f64>> {
        self.inner.gram.to_rows()
    }

    #[getter]
    fn gram_cond(&self) -> f64 {
        self.inner.gram_cond
    }

    /// Sensor values of a full-grid vector.
    fn measure(&self, f: Vec<f64>) -> Vec<f64> {
        self.inner.measure(&f)
    }

    /// Coefficients and full-grid reconstruction from sensor values.
    fn project(&self, data: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        gappy_project(&self.inner, &data).map_err(err)
    }
}

/// POD basis with a fixed `rank`, or the smallest one meeting `tol`.
#[pyfunction]
#[pyo3(signature = (s, rank=None, tol=1e-8))]
fn pod(s: &PySnapshots, rank: Option<usize>, tol: f64) -> PyResult<PyPod> {
    let t = rank.map_or(Truncation::Error(tol), Truncation::Rank);
    Ok(PyPod {
        inner: pod_basis(&s.inner, t).map_err(err)?,
    })
}

/// Cross approximation; `pivot` is "global" or "partial", `row_rule` "cyclic", "random" or "node".
#[pyfunction]
#[pyo3(signature = (s, tol=1e-8, pivot="global", max_rank=None, row_rule="cyclic", seed=0))]
fn aca(s: &PySnapshots, tol: f64, pivot: &str, max_rank: Option<usize>, row_rule: &str, seed: u64) -> PyResult<PyCross> {
    let rule = match row_rule {
        "cyclic" => RowRule::Cyclic,
        "random" => RowRule::Random { seed },
        "node" => RowRule::NodeBased,
        other => return Err(PyValueError::new_err(format!("unknown row rule '{other}'"))),
    };
    let mut opts = match pivot {
        "global" => AcaOptions::global(tol),
        "partial" => AcaOptions::partial(tol, rule),
        other => return Err(PyValueError::new_err(format!("unknown pivoting '{other}'"))),
    };
    opts.max_rank = max_rank;
    let inner = if pivot == "global" {
        aca2_bivariate(&s.inner, &opts)
    } else {
        aca_matrix(&s.inner, &opts)
    };
    Ok(PyCross { inner: inner.map_err(err)? })
}

/// Empirical interpolation with the greedy in the discrete `p` norm ("1", "2" or "inf").
#[pyfunction]
#[pyo3(signature = (s, tol=1e-8, p="inf", max_rank=None))]
fn eim(s: &PySnapshots, tol: f64, p: &str, max_rank: Option<usize>) -> PyResult<PyEim> {
    let mut opts = EimOptions::new(tol, norm(p)?);
    opts.max_rank = max_rank;
    Ok(PyEim {
        inner: eim_greedy(&s.inner, &opts).map_err(err)?,
    })
}

/// Greedy sensors; returns the indices and the per-step criterion values.
#[pyfunction]
#[pyo3(signature = (basis, count, criterion="cond", s=None, measure=1.0, p="inf"))]
fn place_sensors(
    basis: Vec<Vec<f64>>,
    count: usize,
    criterion: &str,
    s: Option<&PySnapshots>,
    measure: f64,
    p: &str,
) -> PyResult<(Vec<usize>, Vec<f64>)> {
    let placement = match (criterion, s) {
        ("cond", _) => place_sensors_cond(&basis, measure, count),
        ("error", Some(s)) => place_sensors_error(&basis, &s.inner, count, norm(p)?),
        ("error", None) => return Err(PyValueError::new_err("the error criterion needs snapshots")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown criterion '{other}'"))),
    }
    .map_err(err)?;
    Ok((placement.sensors, placement.history))
}

/// Runs global cross approximation and sup-norm interpolation side by side.
#[pyfunction]
#[pyo3(signature = (s, qmax=8))]
fn compare<'py>(py: Python<'py>, s: &PySnapshots, qmax: usize) -> PyResult<Bound<'py, PyDict>> {
    let r = check_equivalence_aca_eim(&s.inner, qmax).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("passed", r.passed)?;
    d.set_item("indices_match", r.indices_match)?;
    d.set_item("rank_aca", r.rank_aca)?;
    d.set_item("rank_eim", r.rank_eim)?;
    d.set_item("aca_rows", r.aca_rows)?;
    d.set_item("aca_cols", r.aca_cols)?;
    d.set_item("eim_points", r.eim_points)?;
    d.set_item("eim_params", r.eim_params)?;
    d.set_item("coefficient_deviation", r.coefficient_deviation)?;
    d.set_item("interpolant_deviation", r.interpolant_deviation)?;
    d.set_item("divergence", r.divergence)?;
    Ok(d)
}

/// Decay table as CSV text with columns q, the methods, then the n-width floor.
#[pyfunction]
#[pyo3(signature = (s, methods=None, qmax=12))]
fn report(s: &PySnapshots, methods: Option<Vec<String>>, qmax: usize) -> PyResult<String> {
    let methods = match methods {
        None => DecayMethod::ALL.to_vec(),
        Some(ms) => ms.iter().map(|m| m.parse()).collect::<Result<Vec<_>, _>>().map_err(err)?,
    };
    Ok(decay_report(&s.inner, &methods, qmax).map_err(err)?.to_csv())
}

/// `σ_{q+1}` of the weight-scaled snapshot matrix.
#[pyfunction]
fn nwidth(s: &PySnapshots, q: usize) -> PyResult<f64> {
    nwidth_oracle(&s.inner, q).map_err(err)
}

#[pymodule]
fn lowrank_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySnapshots>()?;
    m.add_class::<PyPod>()?;
    m.add_class::<PyCross>()?;
    m.add_class::<PyEim>()?;
    m.add_class::<PyGappy>()?;
    m.add_function(wrap_pyfunction!(pod, m)?)?;
    m.add_function(wrap_pyfunction!(aca, m)?)?;
    m.add_function(wrap_pyfunction!(eim, m)?)?;
    m.add_function(wrap_pyfunction!(place_sensors, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(nwidth, m)?)?;
    Ok(())
}
