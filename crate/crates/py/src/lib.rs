use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use rcdlab::calculus::{bochner_margin, gamma, gamma2, laplacian};
use rcdlab::inequalities;
use rcdlab::scenario::{self, LoadedScenario, RunOptions};
use rcdlab::transport;

fn lab_err(e: rcdlab::LabError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn field(space: &rcdlab::ModelSpace, values: Vec<f64>) -> PyResult<rcdlab::ScalarField> {
    if values.len() != space.len() {
        return Err(PyValueError::new_err(format!("expected {} values, got {}", space.len(), values.len())));
    }
    Ok(rcdlab::ScalarField(values))
}

fn cd_of(space: &rcdlab::ModelSpace, k: Option<f64>, n: Option<f64>) -> PyResult<rcdlab::CurvatureDimension> {
    let base = space.expected_cd();
    rcdlab::CurvatureDimension::new(k.unwrap_or(base.k), n.unwrap_or(base.n)).map_err(lab_err)
}

#[pyclass(name = "ModelSpace", frozen)]
struct PyModelSpace {
    inner: rcdlab::ModelSpace,
}

#[pymethods]
impl PyModelSpace {
    #[staticmethod]
    fn interval(n: usize, length: f64) -> PyResult<Self> {
        rcdlab::ModelSpace::interval(n, length).map(|inner| Self { inner }).map_err(lab_err)
    }

    #[staticmethod]
    fn circle(n: usize, circumference: f64) -> PyResult<Self> {
        rcdlab::ModelSpace::circle(n, circumference).map(|inner| Self { inner }).map_err(lab_err)
    }

    #[staticmethod]
    fn sphere_model(n: usize, dim: f64) -> PyResult<Self> {
        rcdlab::ModelSpace::sphere_model(n, dim).map(|inner| Self { inner }).map_err(lab_err)
    }

    #[staticmethod]
    fn hyperbolic_model(n: usize, dim: f64, radius: f64) -> PyResult<Self> {
        rcdlab::ModelSpace::hyperbolic_model(n, dim, radius).map(|inner| Self { inner }).map_err(lab_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn measure(&self) -> Vec<f64> {
        self.inner.measure().to_vec()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    /// `(K, N)` the model is built to satisfy.
    #[getter]
    fn expected_cd(&self) -> (f64, f64) {
        let cd = self.inner.expected_cd();
        (cd.k, cd.n)
    }

    fn distance(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.len() || j >= self.inner.len() {
            return Err(PyValueError::new_err("node index out of range"));
        }
        Ok(self.inner.distance(i, j))
    }

    fn laplacian(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        laplacian(&self.inner, &field(&self.inner, f)?).map(|v| v.into_inner()).map_err(lab_err)
    }

    fn gamma(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        gamma(&self.inner, &field(&self.inner, f)?).map(|v| v.into_inner()).map_err(lab_err)
    }

    fn gamma2(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        gamma2(&self.inner, &field(&self.inner, f)?).map(|v| v.into_inner()).map_err(lab_err)
    }

    #[pyo3(signature = (f, k=None, n=None))]
    fn bochner_margin(&self, f: Vec<f64>, k: Option<f64>, n: Option<f64>) -> PyResult<Vec<f64>> {
        let cd = cd_of(&self.inner, k, n)?;
        bochner_margin(&self.inner, &field(&self.inner, f)?, cd).map(|v| v.into_inner()).map_err(lab_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("ModelSpace({}, n={}, h={:.4e})", self.inner.name(), self.inner.len(), self.inner.spacing())
    }
}

#[pyclass(name = "Report", frozen, get_all)]
struct PyReport {
    name: String,
    verdict: String,
    min_margin: f64,
    tolerance: f64,
    margins: Vec<f64>,
    json: String,
}

impl From<rcdlab::InequalityReport> for PyReport {
    fn from(r: rcdlab::InequalityReport) -> Self {
        let verdict = verdict_name(r.verdict);
        Self {
            json: r.to_json(),
            name: r.name,
            verdict,
            min_margin: r.min_margin,
            tolerance: r.tolerance,
            margins: r.margin_field,
        }
    }
}

fn verdict_name(v: rcdlab::Verdict) -> String {
    match v {
        rcdlab::Verdict::Pass => "pass",
        rcdlab::Verdict::Fail => "fail",
        rcdlab::Verdict::VacuousPass => "vacuous-pass",
        rcdlab::Verdict::OutsideRegime => "outside-regime",
        rcdlab::Verdict::Error => "error",
    }
    .to_string()
}

#[pymethods]
impl PyReport {
    fn passed(&self) -> bool {
        self.verdict != "fail" && self.verdict != "error"
    }

    fn __repr__(&self) -> String {
        format!("Report({}, {}, min_margin={:.4e})", self.name, self.verdict, self.min_margin)
    }
}

#[pyclass(name = "HeatSolver", frozen)]
struct PyHeatSolver {
    inner: rcdlab::SpectralSolver,
}

#[pymethods]
impl PyHeatSolver {
    #[new]
    fn new(space: &PyModelSpace) -> PyResult<Self> {
        rcdlab::SpectralSolver::new(&space.inner).map(|inner| Self { inner }).map_err(lab_err)
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    fn heat_apply(&self, f: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        let f = field(self.inner.space(), f)?;
        self.inner.heat_apply(&f, t).map(|v| v.into_inner()).map_err(lab_err)
    }

    fn heat_kernel(&self, x: usize, t: f64) -> PyResult<Vec<f64>> {
        self.inner.heat_kernel(x, t).map(|k| k.density.into_inner()).map_err(lab_err)
    }

    #[pyo3(signature = (f, t, dim=None, tolerance=1e-6))]
    fn li_yau(&self, f: Vec<f64>, t: f64, dim: Option<f64>, tolerance: f64) -> PyResult<PyReport> {
        let space = self.inner.space();
        let dim = dim.unwrap_or(space.expected_cd().n);
        inequalities::li_yau_check(&self.inner, &field(space, f)?, t, dim, tolerance).map(Into::into).map_err(lab_err)
    }

    #[pyo3(signature = (f, t, k=None, n=None, tolerance=1e-5))]
    fn bakry_qian(&self, f: Vec<f64>, t: f64, k: Option<f64>, n: Option<f64>, tolerance: f64) -> PyResult<PyReport> {
        let space = self.inner.space();
        let cd = cd_of(space, k, n)?;
        inequalities::bakry_qian_check(&self.inner, &field(space, f)?, t, cd, tolerance).map(Into::into).map_err(lab_err)
    }

    #[pyo3(signature = (f, t, k=None, n=None, tolerance=1e-5))]
    fn baudoin_garofalo(&self, f: Vec<f64>, t: f64, k: Option<f64>, n: Option<f64>, tolerance: f64) -> PyResult<PyReport> {
        let space = self.inner.space();
        let cd = cd_of(space, k, n)?;
        inequalities::baudoin_garofalo_check(&self.inner, &field(space, f)?, t, cd, tolerance)
            .map(Into::into)
            .map_err(lab_err)
    }

    #[pyo3(signature = (f, x, y, s, t, k=None, n=None, tolerance=1e-6))]
    #[allow(clippy::too_many_arguments)]
    fn harnack(
        &self,
        f: Vec<f64>,
        x: usize,
        y: usize,
        s: f64,
        t: f64,
        k: Option<f64>,
        n: Option<f64>,
        tolerance: f64,
    ) -> PyResult<PyReport> {
        let space = self.inner.space();
        let cd = cd_of(space, k, n)?;
        inequalities::harnack_check(&self.inner, &field(space, f)?, x, y, s, t, cd, tolerance)
            .map(Into::into)
            .map_err(lab_err)
    }

    #[pyo3(signature = (f, t, tolerance))]
    fn be_flow(&self, f: Vec<f64>, t: f64, tolerance: f64) -> PyResult<PyReport> {
        let space = self.inner.space();
        inequalities::be_flow_check(&self.inner, &field(space, f)?, t, space.expected_cd(), tolerance)
            .map(Into::into)
            .map_err(lab_err)
    }

    #[pyo3(signature = (f, t, tolerance))]
    fn eks(&self, f: Vec<f64>, t: f64, tolerance: f64) -> PyResult<PyReport> {
        let space = self.inner.space();
        inequalities::eks_check(&self.inner, &field(space, f)?, t, space.expected_cd(), tolerance)
            .map(Into::into)
            .map_err(lab_err)
    }
}

fn measures(space: &PyModelSpace, a: Vec<f64>, b: Vec<f64>) -> PyResult<(rcdlab::DiscreteMeasure, rcdlab::DiscreteMeasure)> {
    let mu0 = rcdlab::DiscreteMeasure::new(&space.inner, a).map_err(lab_err)?;
    let mu1 = rcdlab::DiscreteMeasure::new(&space.inner, b).map_err(lab_err)?;
    Ok((mu0, mu1))
}

/// Quadratic Wasserstein distance between two mass vectors via the quantile coupling.
#[pyfunction]
fn w2_quantile(space: &PyModelSpace, mu0: Vec<f64>, mu1: Vec<f64>) -> PyResult<f64> {
    let (a, b) = measures(space, mu0, mu1)?;
    transport::w2_quantile(&space.inner, &a, &b).map(|p| p.w2()).map_err(lab_err)
}

/// Same distance from the min-cost-flow solver; small supports only.
#[pyfunction]
fn w2_lp(space: &PyModelSpace, mu0: Vec<f64>, mu1: Vec<f64>) -> PyResult<f64> {
    let (a, b) = measures(space, mu0, mu1)?;
    transport::w2_lp(&space.inner, &a, &b).map(|p| p.w2()).map_err(lab_err)
}

#[pyfunction]
fn gaussian_kernel_oracle(dim: f64, t: f64, r: f64) -> PyResult<(f64, f64, f64)> {
    let g = rcdlab::gaussian_kernel_oracle(dim, t, r).map_err(lab_err)?;
    Ok((g.density, g.grad_log_sq, g.dt_log))
}

/// Runs a JSON scenario and returns `(exit_code, report_json)`; configuration errors raise.
#[pyfunction]
#[pyo3(signature = (text, seed=None, tolerance_scale=1.0))]
fn run_scenario(text: &str, seed: Option<u64>, tolerance_scale: f64) -> PyResult<(i32, String)> {
    let loaded = LoadedScenario::parse(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = scenario::run(&loaded, RunOptions { seed, tolerance_scale }).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((report.exit_code, report.to_json()))
}

#[pyfunction]
fn list_models() -> String {
    scenario::list_models()
}

#[pymodule]
pub fn rcdlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelSpace>()?;
    m.add_class::<PyHeatSolver>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(w2_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(w2_lp, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_kernel_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(list_models, m)?)?;
    m.add("__version__", scenario::VERSION)?;
    Ok(())
}
