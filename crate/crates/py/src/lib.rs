use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rca_core::bonferroni::{self, AbarGrid};
use rca_core::estimate::{nuisance_estimates, residuals};
use rca_core::limitdist::{self, PathConfig};
use rca_core::simulate::{gen_innovations, simulate_rca, InnovationKind, InnovationSpec, RcaParams, Series};
use rca_core::teststats::{StatContext, StatKind};

fn err(e: rca_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn series(y: Vec<f64>) -> PyResult<Series> {
    Series::new(y).map_err(err)
}

fn kind(name: &str) -> PyResult<StatKind> {
    name.parse().map_err(err)
}

fn innovation(name: &str) -> PyResult<InnovationKind> {
    match name.to_ascii_lowercase().as_str() {
        "normal" => Ok(InnovationKind::Normal),
        s => s
            .strip_prefix("chisq")
            .map(|d| d.trim_start_matches(':'))
            .and_then(|d| d.parse::<u32>().ok())
            .filter(|&df| df > 0)
            .map(|df| InnovationKind::StdChiSq { df })
            .ok_or_else(|| PyValueError::new_err(format!("unknown innovation '{name}'"))),
    }
}

/// Quantiles of the local-to-unity t-ratio limit.
#[pyclass(name = "CriticalValueTable", skip_from_py_object)]
#[derive(Clone)]
struct PyCvTable(limitdist::CriticalValueTable);

#[pymethods]
impl PyCvTable {
    #[staticmethod]
    fn shipped() -> Self {
        Self(limitdist::CriticalValueTable::shipped())
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        limitdist::CriticalValueTable::load(&path).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (a_grid, levels, steps=2000, reps=200_000, seed=0))]
    fn build(a_grid: Vec<f64>, levels: Vec<f64>, steps: usize, reps: usize, seed: u64) -> PyResult<Self> {
        limitdist::build_cv_table(&a_grid, &levels, &PathConfig::new(steps, reps, seed)).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    fn quantile(&self, a: f64, level: f64) -> PyResult<f64> {
        self.0.quantile(a, level).map_err(err)
    }

    fn a_grid(&self) -> Vec<f64> {
        self.0.a_grid().to_vec()
    }

    fn levels(&self) -> Vec<f64> {
        self.0.levels().to_vec()
    }
}

/// α₁ values keyed by |ψ|.
#[pyclass(name = "Alpha1Table", skip_from_py_object)]
#[derive(Clone)]
struct PyAlpha1Table(bonferroni::Alpha1Table);

#[pymethods]
impl PyAlpha1Table {
    #[staticmethod]
    fn published() -> Self {
        Self(bonferroni::Alpha1Table::published())
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        bonferroni::Alpha1Table::load(&path).map(Self).map_err(err)
    }

    fn lookup(&self, psi_abs: f64) -> PyResult<f64> {
        self.0.lookup(psi_abs).map_err(err)
    }

    /// `(psi_lo, psi_hi, openness, alpha1)` tuples.
    fn rows(&self) -> Vec<(f64, f64, String, f64)> {
        self.0.rows.iter().map(|r| (r.psi_lo, r.psi_hi, r.openness(), r.alpha1)).collect()
    }

    fn __len__(&self) -> usize {
        self.0.rows.len()
    }
}

/// Simulates `y_0..y_T` from the RCA(1) model.
#[pyfunction]
#[pyo3(signature = (t, rho=None, a=None, omega2=None, c2=None, innovation="normal", corr=0.0, y0=0.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    t: usize,
    rho: Option<f64>,
    a: Option<f64>,
    omega2: Option<f64>,
    c2: Option<f64>,
    innovation: &str,
    corr: f64,
    y0: f64,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let spec = InnovationSpec { kind: self::innovation(innovation)?, ..InnovationSpec::normal() }.with_corr(corr);
    let mut p = RcaParams::new(t).y0(y0);
    p.rho = rho;
    p.a = a;
    p.omega2 = omega2;
    p.c2 = c2;
    let inn = gen_innovations(&spec, t, seed).map_err(err)?;
    Ok(simulate_rca(&p, &inn.eps, &inn.v).map_err(err)?.into_values())
}

/// OLS ρ̂ with σ̂²_ε(ρ̂) and the t-ratio at `rho_bar` if given.
#[pyfunction]
#[pyo3(signature = (y, rho_bar=None))]
fn rho_ols<'py>(py: Python<'py>, y: Vec<f64>, rho_bar: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let est = rca_core::estimate::rho_ols(&series(y)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("rho_hat", est.rho_hat)?;
    d.set_item("sigma_eps2", est.sigma_eps2)?;
    d.set_item("sum_lag_sq", est.sum_lag_sq)?;
    if let Some(rb) = rho_bar {
        d.set_item("t_ratio", est.t_ratio(rb).map_err(err)?)?;
    }
    Ok(d)
}

/// σ̂²_ε, σ̂²_η and ψ̂ from residuals at `rho`.
#[pyfunction]
fn nuisance<'py>(py: Python<'py>, y: Vec<f64>, rho: f64) -> PyResult<Bound<'py, PyDict>> {
    let n = nuisance_estimates(&residuals(&series(y)?, rho)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("sigma_eps2", n.sigma_eps2)?;
    d.set_item("sigma_eta2", n.sigma_eta2)?;
    d.set_item("psi_hat", n.psi_hat)?;
    Ok(d)
}

/// One statistic (`LN`, `LNstar`, `AugT`, `AugTstar`, `Wald`, `WaldStar`) at `rho`.
#[pyfunction]
fn statistic(y: Vec<f64>, rho: f64, kind: &str) -> PyResult<f64> {
    let y = series(y)?;
    Ok(StatContext::new(&y).stat(rho, self::kind(kind)?).map_err(err)?.value)
}

/// All six statistics at `rho`, keyed by name.
#[pyfunction]
fn statistics<'py>(py: Python<'py>, y: Vec<f64>, rho: f64) -> PyResult<Bound<'py, PyDict>> {
    let y = series(y)?;
    let d = PyDict::new(py);
    for s in StatContext::new(&y).all(rho).map_err(err)? {
        d.set_item(s.kind.name(), s.value)?;
    }
    Ok(d)
}

/// Two-step Bonferroni test; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (y, alpha2=0.05, kind="WaldStar", cv_table=None, alpha1_table=None, alpha1=None, grid=(-300.0, 20.0, 1.0)))]
#[allow(clippy::too_many_arguments)]
fn bonferroni_test<'py>(
    py: Python<'py>,
    y: Vec<f64>,
    alpha2: f64,
    kind: &str,
    cv_table: Option<PyRef<'py, PyCvTable>>,
    alpha1_table: Option<PyRef<'py, PyAlpha1Table>>,
    alpha1: Option<f64>,
    grid: (f64, f64, f64),
) -> PyResult<Bound<'py, PyDict>> {
    let y = series(y)?;
    let shipped;
    let cv = match &cv_table {
        Some(t) => &t.0,
        None => {
            shipped = limitdist::CriticalValueTable::shipped();
            &shipped
        }
    };
    let grid = AbarGrid::new(grid.0, grid.1, grid.2).map_err(err)?;
    let k = self::kind(kind)?;
    let report = match alpha1 {
        Some(a1) => bonferroni::bonferroni_test_with_alpha1(&y, a1, alpha2, cv, &grid, k),
        None => {
            let a1t = alpha1_table.map(|t| t.0.clone()).unwrap_or_else(bonferroni::Alpha1Table::published);
            bonferroni::bonferroni_test(&y, alpha2, cv, &a1t, &grid, k)
        }
    }
    .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("decision", report.decision.to_string())?;
    d.set_item("kind", report.kind.name())?;
    d.set_item("statistic_min", report.statistic_min)?;
    d.set_item("cv_alpha2", report.cv_alpha2)?;
    d.set_item("alpha1", report.alpha1)?;
    d.set_item("alpha2", report.alpha2)?;
    d.set_item("psi_hat", report.psi_hat)?;
    d.set_item("rho_hat", report.rho_hat)?;
    d.set_item("ci_abar", report.ci.abar_values.clone())?;
    d.set_item("grid_extended", report.grid_extended)?;
    d.set_item("notes", report.notes.clone())?;
    Ok(d)
}

/// Asymptotic rejection rates over `c2_grid`.
#[pyfunction]
#[pyo3(signature = (kind, c2_grid, a=0.0, psi=0.0, q=0.0, ratio=std::f64::consts::FRAC_1_SQRT_2, level=0.05, steps=2000, reps=100_000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn asymptotic_power_curve(
    kind: &str,
    c2_grid: Vec<f64>,
    a: f64,
    psi: f64,
    q: f64,
    ratio: f64,
    level: f64,
    steps: usize,
    reps: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let cfg = PathConfig::new(steps, reps, seed);
    limitdist::asymptotic_power_curve(self::kind(kind)?, a, psi, q, ratio, &c2_grid, level, &cfg).map_err(err)
}

#[pymodule]
fn rca_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCvTable>()?;
    m.add_class::<PyAlpha1Table>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(rho_ols, m)?)?;
    m.add_function(wrap_pyfunction!(nuisance, m)?)?;
    m.add_function(wrap_pyfunction!(statistic, m)?)?;
    m.add_function(wrap_pyfunction!(statistics, m)?)?;
    m.add_function(wrap_pyfunction!(bonferroni_test, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_power_curve, m)?)?;
    Ok(())
}
