//! Finite-sample size and power studies and asymptotic power curves.
//!
//! Results are long-format rows, one per configuration point and test,
//! ready for plotting.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bonferroni::{bonferroni_test, AbarGrid, Alpha1Table, DEFAULT_ALPHA2};
use crate::error::{invalid, Error, Result};
use crate::limitdist::{
    draw_functionals, power_curve_from_draws, quantile_sorted, sorted, CriticalValueTable, PathConfig,
    DEFAULT_FIGURE_REPS,
};
use crate::rng::{derive_seed, par_replicate};
use crate::simulate::{gen_innovations_with, simulate_rca, InnovationSpec, RcaParams, Series};
use crate::teststats::{StatContext, StatKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Size,
    Power,
    AsympPower,
}

impl Design {
    pub fn label(self) -> &'static str {
        match self {
            Design::Size => "size",
            Design::Power => "power",
            Design::AsympPower => "asymp_power",
        }
    }
}

/// Tests compared in the finite-sample studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    /// Bonferroni test with W*, ρ unknown.
    BonfWald,
    /// W* evaluated at the true ρ.
    InfeasibleWaldStar,
    /// LN* evaluated at the true ρ.
    #[serde(rename = "LNstarKnownRho")]
    LnStarKnownRho,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::BonfWald => "BonfWald",
            TestKind::InfeasibleWaldStar => "InfeasibleWaldStar",
            TestKind::LnStarKnownRho => "LNstarKnownRho",
        }
    }

    fn stat_kind(self) -> StatKind {
        match self {
            TestKind::LnStarKnownRho => StatKind::LnStar,
            _ => StatKind::WaldStar,
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bonfwald" | "bonferroni" => Ok(TestKind::BonfWald),
            "infeasiblewaldstar" | "infeasible" => Ok(TestKind::InfeasibleWaldStar),
            "lnstarknownrho" | "lnstar" => Ok(TestKind::LnStarKnownRho),
            _ => Err(invalid(format!("unknown test '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub design: Design,
    pub t: Option<usize>,
    pub rho: Option<f64>,
    pub a: Option<f64>,
    /// Corr(ε, v) in finite samples; the localized correlation q for
    /// asymptotic curves.
    pub corr: Option<f64>,
    pub omega2: Option<f64>,
    pub c2: Option<f64>,
    pub kind: String,
    pub rate: f64,
    pub se: f64,
    pub reps: usize,
}

impl ResultRow {
    fn new(design: Design, kind: String, hits: usize, reps: usize) -> Self {
        let rate = hits as f64 / reps as f64;
        Self { design, t: None, rho: None, a: None, corr: None, omega2: None, c2: None, kind, rate, se: mc_se(rate, reps), reps }
    }
}

/// `√(p(1−p)/reps)`.
pub fn mc_se(rate: f64, reps: usize) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    /// Full configuration, enough to rerun the experiment.
    pub meta: serde_json::Value,
}

pub const RESULT_COLUMNS: [&str; 11] = ["design", "T", "rho", "a", "corr", "omega2", "c2", "kind", "rate", "se", "reps"];

impl ResultTable {
    pub fn find(&self, pred: impl Fn(&ResultRow) -> bool) -> Option<&ResultRow> {
        self.rows.iter().find(|r| pred(r))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(RESULT_COLUMNS)?;
        for r in &self.rows {
            wtr.write_record([
                r.design.label().to_string(),
                r.t.map(|t| t.to_string()).unwrap_or_default(),
                opt(r.rho),
                opt(r.a),
                opt(r.corr),
                opt(r.omega2),
                opt(r.c2),
                r.kind.clone(),
                r.rate.to_string(),
                r.se.to_string(),
                r.reps.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// CSV plus `<path>.json` metadata sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        std::fs::write(crate::limitdist::sidecar(path), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }
}

fn meta<T: Serialize>(design: Design, cfg: &T) -> Result<serde_json::Value> {
    Ok(serde_json::json!({ "design": design, "config": serde_json::to_value(cfg)? }))
}

/// Tables used by the Bonferroni test.
#[derive(Debug, Clone, Copy)]
pub struct Tables<'a> {
    pub cv: &'a CriticalValueTable,
    pub alpha1: &'a Alpha1Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeConfig {
    pub t_grid: Vec<usize>,
    pub rho_grid: Vec<f64>,
    pub innovation: InnovationSpec,
    pub reps: usize,
    pub seed: u64,
    pub alpha2: f64,
    pub grid: AbarGrid,
    pub tests: Vec<TestKind>,
}

impl SizeConfig {
    pub fn new(t_grid: Vec<usize>, rho_grid: Vec<f64>, reps: usize, seed: u64) -> Self {
        Self {
            t_grid,
            rho_grid,
            innovation: InnovationSpec::normal(),
            reps,
            seed,
            alpha2: DEFAULT_ALPHA2,
            grid: AbarGrid::default(),
            tests: vec![TestKind::BonfWald],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() || self.rho_grid.is_empty() || self.tests.is_empty() {
            return Err(invalid("size experiment grids must be nonempty"));
        }
        if self.t_grid.iter().any(|&t| t < 10) {
            return Err(invalid("T must be at least 10"));
        }
        check_common(self.reps, self.alpha2, &self.grid)?;
        self.innovation.effective_corr(self.t_grid[0]).map(|_| ())
    }
}

fn check_common(reps: usize, alpha2: f64, grid: &AbarGrid) -> Result<()> {
    if reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    if !(alpha2 > 0.0 && alpha2 < 1.0) {
        return Err(invalid("alpha2 must lie in (0, 1)"));
    }
    grid.validate()
}

/// Values compared against the critical value, one per test; the
/// Bonferroni score is the minimum W* over the confidence set, or −∞ when
/// the set is empty.
fn scores(y: &Series, rho: f64, tests: &[TestKind], alpha2: f64, grid: &AbarGrid, tab: Tables) -> Result<Vec<f64>> {
    let ctx = StatContext::new(y);
    tests
        .iter()
        .map(|&k| match k {
            TestKind::BonfWald => {
                let r = bonferroni_test(y, alpha2, tab.cv, tab.alpha1, grid, StatKind::WaldStar)?;
                Ok(r.statistic_min.unwrap_or(f64::NEG_INFINITY))
            }
            _ => Ok(ctx.stat(rho, k.stat_kind())?.value),
        })
        .collect()
}

/// Null rejection rates of the Bonferroni test (and any other listed tests)
/// with ω = 0.
pub fn run_size(cfg: &SizeConfig, tab: Tables) -> Result<ResultTable> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (ti, &t) in cfg.t_grid.iter().enumerate() {
        let spec = cfg.innovation;
        for (ri, &rho) in cfg.rho_grid.iter().enumerate() {
            let seed = derive_seed(cfg.seed, ((ti as u64) << 32) | ri as u64);
            let out = par_replicate(cfg.reps, seed, |rng, _| {
                let inn = gen_innovations_with(&spec, t, rng)?;
                let y = simulate_rca(&RcaParams::new(t).rho(rho), &inn.eps, &inn.v)?;
                scores(&y, rho, &cfg.tests, cfg.alpha2, &cfg.grid, tab)
            });
            let out: Vec<Vec<f64>> = out.into_iter().collect::<Result<_>>()?;
            for (j, &k) in cfg.tests.iter().enumerate() {
                let cv = k.stat_kind().pivotal_critical_value(cfg.alpha2)?;
                let hits = out.iter().filter(|s| s[j] > cv).count();
                let mut row = ResultRow::new(Design::Size, k.name().into(), hits, cfg.reps);
                row.t = Some(t);
                row.rho = Some(rho);
                row.a = Some(t as f64 * (rho - 1.0));
                row.omega2 = Some(0.0);
                row.c2 = Some(0.0);
                rows.push(row);
            }
        }
    }
    Ok(ResultTable { rows, meta: meta(Design::Size, cfg)? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub t: usize,
    pub rho_grid: Vec<f64>,
    pub corr_grid: Vec<f64>,
    pub omega2_grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub alpha2: f64,
    pub grid: AbarGrid,
    pub tests: Vec<TestKind>,
    /// Use simulated finite-sample null quantiles as critical values.
    pub size_adjust: bool,
}

impl PowerConfig {
    pub fn new(t: usize, rho_grid: Vec<f64>, corr_grid: Vec<f64>, omega2_grid: Vec<f64>, reps: usize, seed: u64) -> Self {
        Self {
            t,
            rho_grid,
            corr_grid,
            omega2_grid,
            reps,
            seed,
            alpha2: DEFAULT_ALPHA2,
            grid: AbarGrid::default(),
            tests: vec![TestKind::BonfWald, TestKind::InfeasibleWaldStar, TestKind::LnStarKnownRho],
            size_adjust: false,
        }
    }

    /// ω² grid matching `c² ∈ (0, c2_max]` at this T.
    pub fn omega2_from_c2(t: usize, c2: &[f64]) -> Vec<f64> {
        c2.iter().map(|c| c / (t as f64).powf(1.5)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho_grid.is_empty() || self.corr_grid.is_empty() || self.omega2_grid.is_empty() || self.tests.is_empty() {
            return Err(invalid("power experiment grids must be nonempty"));
        }
        if self.t < 10 {
            return Err(invalid("T must be at least 10"));
        }
        if self.corr_grid.iter().any(|c| !(c.abs() <= 1.0)) {
            return Err(invalid("correlations must lie in [-1, 1]"));
        }
        if self.omega2_grid.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(invalid("omega2 values must be finite and nonnegative"));
        }
        check_common(self.reps, self.alpha2, &self.grid)
    }
}

/// Rejection rates over (ρ, Corr(ε, v), ω²). Within one ρ every point reuses
/// the same (ε, w) draws, with `v = corr·ε + √(1−corr²)·w`.
pub fn run_power(cfg: &PowerConfig, tab: Tables) -> Result<ResultTable> {
    cfg.validate()?;
    let t = cfg.t;
    let nt = cfg.tests.len();
    let mut rows = Vec::new();
    for (ri, &rho) in cfg.rho_grid.iter().enumerate() {
        let cvs: Vec<f64> = if cfg.size_adjust {
            null_quantiles(cfg, rho, derive_seed(cfg.seed, (1 << 40) | ri as u64), tab)?
        } else {
            cfg.tests.iter().map(|k| k.stat_kind().pivotal_critical_value(cfg.alpha2)).collect::<Result<_>>()?
        };
        let seed = derive_seed(cfg.seed, ri as u64);
        let out = par_replicate(cfg.reps, seed, |rng, _| -> Result<Vec<bool>> {
            let base = gen_innovations_with(&InnovationSpec::normal(), t, rng)?;
            let mut hits = Vec::with_capacity(cfg.corr_grid.len() * cfg.omega2_grid.len() * nt);
            for &corr in &cfg.corr_grid {
                let s = (1.0 - corr * corr).sqrt();
                let v: Vec<f64> = base.eps.iter().zip(&base.v).map(|(e, w)| corr * e + s * w).collect();
                for &w2 in &cfg.omega2_grid {
                    let y = simulate_rca(&RcaParams::new(t).rho(rho).omega2(w2), &base.eps, &v)?;
                    let sc = scores(&y, rho, &cfg.tests, cfg.alpha2, &cfg.grid, tab)?;
                    hits.extend(sc.iter().zip(&cvs).map(|(s, cv)| s > cv));
                }
            }
            Ok(hits)
        });
        let out: Vec<Vec<bool>> = out.into_iter().collect::<Result<_>>()?;
        let mut idx = 0;
        for &corr in &cfg.corr_grid {
            for &w2 in &cfg.omega2_grid {
                for k in &cfg.tests {
                    let hits = out.iter().filter(|h| h[idx]).count();
                    let mut row = ResultRow::new(Design::Power, k.name().into(), hits, cfg.reps);
                    row.t = Some(t);
                    row.rho = Some(rho);
                    row.a = Some(t as f64 * (rho - 1.0));
                    row.corr = Some(corr);
                    row.omega2 = Some(w2);
                    row.c2 = Some(w2 * (t as f64).powf(1.5));
                    rows.push(row);
                    idx += 1;
                }
            }
        }
    }
    Ok(ResultTable { rows, meta: meta(Design::Power, cfg)? })
}

/// Empirical upper-α₂ quantiles of each score under ω = 0.
fn null_quantiles(cfg: &PowerConfig, rho: f64, seed: u64, tab: Tables) -> Result<Vec<f64>> {
    let t = cfg.t;
    let out = par_replicate(cfg.reps, seed, |rng, _| {
        let inn = gen_innovations_with(&InnovationSpec::normal(), t, rng)?;
        let y = simulate_rca(&RcaParams::new(t).rho(rho), &inn.eps, &inn.v)?;
        scores(&y, rho, &cfg.tests, cfg.alpha2, &cfg.grid, tab)
    });
    let out: Vec<Vec<f64>> = out.into_iter().collect::<Result<_>>()?;
    Ok((0..cfg.tests.len())
        .map(|j| quantile_sorted(&sorted(out.iter().map(|s| s[j]).collect()), 1.0 - cfg.alpha2))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsympPowerConfig {
    pub a_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub c2_grid: Vec<f64>,
    pub kinds: Vec<StatKind>,
    pub psi: f64,
    /// σ²_ε/σ_η.
    pub ratio: f64,
    pub level: f64,
    pub steps: usize,
    pub reps: usize,
    pub seed: u64,
}

impl AsympPowerConfig {
    pub fn new(a_grid: Vec<f64>, q_grid: Vec<f64>, c2_grid: Vec<f64>, kinds: Vec<StatKind>, seed: u64) -> Self {
        Self {
            a_grid,
            q_grid,
            c2_grid,
            kinds,
            psi: 0.0,
            ratio: std::f64::consts::FRAC_1_SQRT_2,
            level: 0.05,
            steps: crate::limitdist::DEFAULT_TABLE_STEPS,
            reps: DEFAULT_FIGURE_REPS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a_grid.is_empty() || self.q_grid.is_empty() || self.c2_grid.is_empty() || self.kinds.is_empty() {
            return Err(invalid("asymptotic power grids must be nonempty"));
        }
        if self.c2_grid.iter().any(|c| !(*c >= 0.0)) {
            return Err(invalid("c2 values must be nonnegative"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("level must lie in (0, 1)"));
        }
        PathConfig::new(self.steps, self.reps, self.seed).with_psi(self.psi).validate()
    }
}

/// Asymptotic power curves; all q, kinds and c² at one a share draws.
pub fn run_asymp_power(cfg: &AsympPowerConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (ai, &a) in cfg.a_grid.iter().enumerate() {
        let pc = PathConfig::new(cfg.steps, cfg.reps, derive_seed(cfg.seed, ai as u64)).with_a(a).with_psi(cfg.psi);
        let draws = draw_functionals(&pc)?;
        for &q in &cfg.q_grid {
            for &kind in &cfg.kinds {
                let power = power_curve_from_draws(&draws, kind, cfg.psi, q, cfg.ratio, &cfg.c2_grid, cfg.level)?;
                for (&c2, p) in cfg.c2_grid.iter().zip(power) {
                    let hits = (p * cfg.reps as f64).round() as usize;
                    let mut row = ResultRow::new(Design::AsympPower, kind.name().into(), hits, cfg.reps);
                    row.a = Some(a);
                    row.corr = Some(q);
                    row.c2 = Some(c2);
                    rows.push(row);
                }
            }
        }
    }
    Ok(ResultTable { rows, meta: meta(Design::AsympPower, cfg)? })
}
