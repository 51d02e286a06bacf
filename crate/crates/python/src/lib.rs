//! Python bindings: models, simulation, degree and fitness diagnostics, and
//! the condensation criterion.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dynfit::condensation::{self, MStarVerdict, NonCondensingReason, DEFAULT_GRID_POINTS, DEFAULT_PRECISION};
use dynfit::diagnostics::{self, Normalization};
use dynfit::graph::{self, ModelKind};
use dynfit::harness::{self, ExperimentSpec, RunOptions};
use dynfit::increments::{IncrementDistribution, SeedPlan, StreamRole};

fn py_err(e: dynfit::Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for dynfit::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Increment law, e.g. `Distribution("beta:1,3")`, `"uniform"`, `"gumbel"`, `"const:0.5"`.
#[pyclass(name = "Distribution", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyDistribution(IncrementDistribution);

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().py().map(Self)
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance()
    }

    fn survival(&self, x: f64) -> f64 {
        self.0.survival(x)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Distribution('{}')", self.0)
    }
}

/// Growth model, e.g. `Model("r2:2:beta:1,1.9")`, `"ba"`, `"bbm:5:uniform"`, `"r3:sqrt:uniform"`.
#[pyclass(name = "Model", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyModel(ModelKind);

#[pymethods]
impl PyModel {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().py().map(Self)
    }

    /// Whether a step costs time linear in the graph size.
    #[getter]
    fn is_quadratic(&self) -> bool {
        self.0.is_quadratic()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Model('{}')", self.0)
    }
}

/// One growing tree. Nodes are numbered from 1; node lists are indexed from 0.
#[pyclass(name = "Simulation")]
struct PySimulation(graph::Simulation);

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (model, seed = 0, trial = 0))]
    fn new(model: &str, seed: u64, trial: u64) -> PyResult<Self> {
        let model: ModelKind = model.parse().py()?;
        graph::Simulation::new(model, SeedPlan::new(seed, trial, StreamRole::Attachment)).py().map(Self)
    }

    #[getter]
    fn t(&self) -> usize {
        self.0.t()
    }

    #[getter]
    fn model(&self) -> String {
        self.0.model().to_string()
    }

    /// Adds one node; returns `(t, z, target)` of the arrival.
    fn step(&mut self, py: Python<'_>) -> PyResult<(usize, f64, usize)> {
        let r = py.detach(|| self.0.step()).py()?;
        Ok((r.t, r.z, r.target))
    }

    fn grow_to(&mut self, py: Python<'_>, n: usize) -> PyResult<()> {
        py.detach(|| self.0.grow_to(n)).py()
    }

    fn degrees(&self) -> Vec<u32> {
        self.0.tree().degrees().to_vec()
    }

    /// Parent of each node; 0 for the root.
    fn parents(&self) -> Vec<u32> {
        self.0.tree().parents().to_vec()
    }

    fn fitness(&self) -> Vec<f64> {
        self.0.fitness_values().to_vec()
    }

    /// Probabilities of attaching the next node to each current node.
    fn next_attachment_probabilities(&self) -> Vec<f64> {
        self.0.next_attachment_probabilities()
    }

    fn partition_function(&self) -> PyResult<f64> {
        graph::partition_function(self.0.tree(), self.0.fitness_values()).py()
    }

    fn check_invariants(&mut self) -> PyResult<()> {
        self.0.check_invariants().py()
    }

    /// `{degree: count}`.
    fn degree_histogram(&self) -> std::collections::BTreeMap<u32, u64> {
        diagnostics::degree_histogram(self.0.tree()).counts
    }

    /// Tail exponent of the degree survival function; `k_max` defaults to max degree / 10.
    #[pyo3(signature = (k_min = diagnostics::DEFAULT_K_MIN, k_max = None, method = "ols"))]
    fn tail_exponent<'py>(
        &self,
        py: Python<'py>,
        k_min: u64,
        k_max: Option<u64>,
        method: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let h = diagnostics::degree_histogram(self.0.tree());
        let k_max = k_max.unwrap_or_else(|| diagnostics::default_fit_window(&h).1);
        let fit = match method {
            "ols" => diagnostics::tail_exponent(&diagnostics::survival(&h), k_min, k_max),
            "hill" => diagnostics::hill_exponent(&h, k_min, k_max),
            other => return Err(PyValueError::new_err(format!("method: expected ols or hill, got `{other}`"))),
        }
        .py()?;
        let d = PyDict::new(py);
        d.set_item("tau", fit.tau)?;
        d.set_item("r_squared", fit.r_squared)?;
        d.set_item("points", fit.points)?;
        d.set_item("k_min", fit.k_min)?;
        d.set_item("k_max", fit.k_max)?;
        Ok(d)
    }

    /// `(bin_edges, degree_mass, node_counts)` over fitness bins.
    #[pyo3(signature = (bins = diagnostics::DEFAULT_BINS, normalization = "raw", range = None))]
    fn fitness_landscape(
        &self,
        bins: usize,
        normalization: &str,
        range: Option<f64>,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<u64>)> {
        let normalization = match normalization {
            "raw" => Normalization::Raw,
            "xi" => Normalization::Xi,
            other => return Err(PyValueError::new_err(format!("normalization: expected raw or xi, got `{other}`"))),
        };
        let l = diagnostics::fitness_landscape(self.0.tree(), self.0.fitness_values(), bins, normalization, range).py()?;
        Ok((l.bin_edges, l.bin_mass, l.node_counts))
    }

    /// Share of degree mass on nodes with fitness at least `h_tilde`.
    fn condensate_mass(&self, h_tilde: f64) -> PyResult<f64> {
        diagnostics::condensate_mass(self.0.tree(), self.0.fitness_values(), h_tilde).py()
    }

    fn top_decile_degree_share(&self) -> PyResult<f64> {
        diagnostics::top_decile_degree_share(self.0.tree(), self.0.fitness_values()).py()
    }

    fn __repr__(&self) -> String {
        format!("Simulation('{}', t={})", self.0.model(), self.0.t())
    }
}

/// Total variation distance between two trees' degree distributions.
#[pyfunction]
fn tv_distance(a: &PySimulation, b: &PySimulation) -> PyResult<f64> {
    diagnostics::tv_distance(&diagnostics::degree_histogram(a.0.tree()), &diagnostics::degree_histogram(b.0.tree())).py()
}

fn estimate_dict<'py>(py: Python<'py>, e: &condensation::CriterionEstimate, precision: f64) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let (lo, hi) = e.interval();
    d.set_item("m", e.m)?;
    d.set_item("value", e.value)?;
    d.set_item("error", e.error())?;
    d.set_item("lower", lo)?;
    d.set_item("upper", hi)?;
    d.set_item("method", e.method.to_string())?;
    d.set_item("verdict", format!("{:?}", e.verdict(precision)))?;
    Ok(d)
}

/// Criterion value by grid convolution with a rigorous bracket.
#[pyfunction]
#[pyo3(signature = (dist, m, grid_points = DEFAULT_GRID_POINTS, precision = DEFAULT_PRECISION))]
fn criterion_quadrature<'py>(
    py: Python<'py>,
    dist: &PyDistribution,
    m: usize,
    grid_points: usize,
    precision: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let e = py.detach(|| condensation::criterion_quadrature(&dist.0, m, grid_points)).py()?;
    estimate_dict(py, &e, precision)
}

/// Monte Carlo criterion estimate with its standard error.
#[pyfunction]
#[pyo3(signature = (dist, m, n_samples = 1_000_000, seed = 0, precision = DEFAULT_PRECISION))]
fn criterion_mc<'py>(
    py: Python<'py>,
    dist: &PyDistribution,
    m: usize,
    n_samples: usize,
    seed: u64,
    precision: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let plan = SeedPlan::new(seed, m as u64, StreamRole::Analysis);
    let e = py.detach(|| condensation::criterion_mc(&dist.0, m, n_samples, plan)).py()?;
    estimate_dict(py, &e, precision)
}

#[pyfunction]
fn beta_bb1_closed_form(alpha: f64, beta: f64) -> PyResult<f64> {
    condensation::beta_bb1_closed_form(alpha, beta).py()
}

/// Large-`m` limit of the criterion.
#[pyfunction]
fn limit_value(dist: &PyDistribution) -> f64 {
    condensation::limit_value(&dist.0)
}

/// `("condensing", m_star)` or `("non_condensing", reason)`.
#[pyfunction]
#[pyo3(signature = (dist, m_max = 50, precision = DEFAULT_PRECISION))]
fn find_mstar(py: Python<'_>, dist: &PyDistribution, m_max: usize, precision: f64) -> PyResult<(String, Py<PyAny>)> {
    let r = py.detach(|| condensation::find_mstar(&dist.0, m_max, precision)).py()?;
    Ok(match r.verdict {
        MStarVerdict::Condensing { m_star } => ("condensing".into(), m_star.into_pyobject(py)?.into_any().unbind()),
        MStarVerdict::NonCondensing { reason } => {
            let reason = match reason {
                NonCondensingReason::MeanAtLeastHalf => "mean_at_least_half".to_string(),
                NonCondensingReason::SearchExhausted { m_max } => format!("search_exhausted(m_max={m_max})"),
            };
            ("non_condensing".into(), reason.into_pyobject(py)?.into_any().unbind())
        }
    })
}

/// Runs a JSON experiment spec; writes outputs when `out_dir` is given.
/// Returns `{"summary": [...], "details": ..., "warnings": [...]}`.
#[pyfunction]
#[pyo3(signature = (spec_json, out_dir = None, workers = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    spec_json: &str,
    out_dir: Option<PathBuf>,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = ExperimentSpec::from_json(spec_json).py()?;
    let report = py.detach(|| harness::run(&spec, &RunOptions { workers })).py()?;
    if let Some(dir) = out_dir {
        report.write_to(&dir).py()?;
    }
    let json = py.import("json")?;
    let d = PyDict::new(py);
    let summary = serde_json::to_string(&report.summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    d.set_item("summary", json.call_method1("loads", (summary,))?)?;
    d.set_item("details", json.call_method1("loads", (report.details.to_string(),))?)?;
    d.set_item("warnings", report.manifest.warnings.clone())?;
    Ok(d)
}

#[pymodule]
fn dynfit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(tv_distance, m)?)?;
    m.add_function(wrap_pyfunction!(criterion_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(criterion_mc, m)?)?;
    m.add_function(wrap_pyfunction!(beta_bb1_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(limit_value, m)?)?;
    m.add_function(wrap_pyfunction!(find_mstar, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
