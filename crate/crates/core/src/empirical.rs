//! Reading an observed series from CSV and running the tests on it.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bonferroni::{bonferroni_test, AbarGrid, Alpha1Table, TestReport, DEFAULT_ALPHA2};
use crate::error::{invalid, Error, Result};
use crate::estimate::{nuisance_estimates, residuals, rho_ols};
use crate::limitdist::CriticalValueTable;
use crate::simulate::Series;
use crate::teststats::{compute_stat, StatKind};

pub const MIN_OBSERVATIONS: usize = 10;

/// Column selector: a header name or a zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detrend {
    None,
    /// Residuals from OLS on an intercept and `t = 0, 1, …`.
    #[default]
    LinearOls,
}

impl FromStr for Detrend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "none" => Ok(Detrend::None),
            "linear" | "linearols" | "ols" => Ok(Detrend::LinearOls),
            _ => Err(invalid(format!("unknown detrend method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConfig {
    pub input_path: PathBuf,
    pub column: Column,
    pub take_log: bool,
    pub detrend: Detrend,
    pub alpha2: f64,
    pub cv_table: Option<PathBuf>,
    pub alpha1_table: Option<PathBuf>,
    pub grid: AbarGrid,
}

impl EmpiricalConfig {
    pub fn new(input_path: impl Into<PathBuf>, column: Column) -> Self {
        Self {
            input_path: input_path.into(),
            column,
            take_log: false,
            detrend: Detrend::LinearOls,
            alpha2: DEFAULT_ALPHA2,
            cv_table: None,
            alpha1_table: None,
            grid: AbarGrid::default(),
        }
    }
}

/// Reads one column of a headed CSV file in row order.
pub fn read_column(path: &Path, column: &Column) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let idx = match column {
        Column::Index(i) if *i < headers.len() => *i,
        Column::Index(i) => return Err(invalid(format!("column index {i} out of range ({} columns)", headers.len()))),
        Column::Name(n) => headers
            .iter()
            .position(|h| h.trim() == n)
            .ok_or_else(|| invalid(format!("no column named '{n}'")))?,
    };
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(idx).map(str::trim).unwrap_or("");
        if cell.is_empty() {
            return Err(invalid(format!("missing value in row {}", row + 1)));
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| invalid(format!("non-numeric value '{cell}' in row {}", row + 1)))?;
        if !v.is_finite() {
            return Err(invalid(format!("non-finite value in row {}", row + 1)));
        }
        out.push(v);
    }
    Ok(out)
}

/// Residuals from regressing `x` on `(1, t)`, `t = 0..n`.
pub fn detrend_linear(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let tbar = (n - 1.0) / 2.0;
    let xbar = x.iter().sum::<f64>() / n;
    let (mut stt, mut stx) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate() {
        let dt = t as f64 - tbar;
        stt += dt * dt;
        stx += dt * (v - xbar);
    }
    let slope = if stt > 0.0 { stx / stt } else { 0.0 };
    x.iter().enumerate().map(|(t, v)| (v - xbar) - slope * (t as f64 - tbar)).collect()
}

pub fn prepare(mut values: Vec<f64>, take_log: bool, detrend: Detrend) -> Result<Series> {
    if values.len() < MIN_OBSERVATIONS {
        return Err(invalid(format!("need at least {MIN_OBSERVATIONS} observations, got {}", values.len())));
    }
    if take_log {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(invalid(format!("cannot take the log of {v} in row {}", i + 1)));
        }
        values.iter_mut().for_each(|v| *v = v.ln());
    }
    if detrend == Detrend::LinearOls {
        values = detrend_linear(&values);
    }
    Series::new(values)
}

pub fn ingest(cfg: &EmpiricalConfig) -> Result<Series> {
    prepare(read_column(&cfg.input_path, &cfg.column)?, cfg.take_log, cfg.detrend)
}

/// One row of the empirical summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub n_obs: usize,
    pub take_log: bool,
    pub detrend: Detrend,
    pub rho_hat: f64,
    pub psi_hat: f64,
    pub bonferroni: TestReport,
    /// LN* at ρ̂, with no correction for estimating ρ.
    pub ln_star_at_rho_hat: f64,
    pub ln_star_cv: f64,
}

pub fn run_empirical(
    y: &Series,
    cfg: &EmpiricalConfig,
    cvtab: &CriticalValueTable,
    a1tab: &Alpha1Table,
) -> Result<EmpiricalReport> {
    let est = rho_ols(y)?;
    let psi_hat = nuisance_estimates(&residuals(y, est.rho_hat))?.psi()?;
    let bonferroni = bonferroni_test(y, cfg.alpha2, cvtab, a1tab, &cfg.grid, StatKind::WaldStar)?;
    let ln = compute_stat(y, est.rho_hat, StatKind::LnStar)?.value;
    Ok(EmpiricalReport {
        n_obs: y.values().len(),
        take_log: cfg.take_log,
        detrend: cfg.detrend,
        rho_hat: est.rho_hat,
        psi_hat,
        bonferroni,
        ln_star_at_rho_hat: ln,
        ln_star_cv: StatKind::LnStar.pivotal_critical_value(cfg.alpha2)?,
    })
}

impl EmpiricalReport {
    pub fn header() -> &'static str {
        "n\trho_hat\tpsi_hat\talpha1\tBonfWald\tmin_WaldStar\tLNstar(rho_hat)"
    }

    /// Tab-separated summary line matching [`Self::header`].
    pub fn summary_row(&self) -> String {
        let b = &self.bonferroni;
        let min = b.statistic_min.map(|m| format!("{m:.3}")).unwrap_or_else(|| "NA".into());
        format!(
            "{}\t{:.4}\t{:.3}\t{:.2}\t{}\t{}\t{:.3}{}",
            self.n_obs,
            self.rho_hat,
            self.psi_hat,
            b.alpha1,
            b.decision,
            min,
            self.ln_star_at_rho_hat,
            if self.ln_star_at_rho_hat > self.ln_star_cv { "*" } else { "" }
        )
    }
}
