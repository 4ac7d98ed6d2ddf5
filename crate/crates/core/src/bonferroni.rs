//! Two-step Bonferroni test for ω² = 0 when ρ is unknown.
//!
//! Step 1 inverts the centered t-ratio over a grid of `ρ̄ = 1 + ā/T` to get
//! an equal-tailed `1 − α₁` confidence set. Step 2 rejects only if the
//! modified statistic exceeds its pivotal `α₂` critical value at every
//! retained `ρ̄`. α₁ is chosen from a table keyed by `|ψ̂|`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::{nuisance_estimates, residuals, rho_ols};
use crate::limitdist::{sidecar, CriticalValueTable};
use crate::rng::{derive_seed, par_replicate};
use crate::simulate::{ar1_path, draw_eps, replaced_z2, InnovationKind, Series};
use crate::teststats::{StatContext, StatKind};

/// α₂ used throughout the published calibration.
pub const DEFAULT_ALPHA2: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Open,
    Closed,
}

/// One `|ψ|` interval of an α₁ table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha1Row {
    pub psi_lo: f64,
    pub psi_hi: f64,
    pub lo: Endpoint,
    pub hi: Endpoint,
    pub alpha1: f64,
}

impl Alpha1Row {
    fn new(psi_lo: f64, psi_hi: f64, openness: &str, alpha1: f64) -> Self {
        let (lo, hi) = parse_openness(openness).expect("static openness");
        Self { psi_lo, psi_hi, lo, hi, alpha1 }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = match self.lo {
            Endpoint::Closed => x >= self.psi_lo,
            Endpoint::Open => x > self.psi_lo,
        };
        let below = match self.hi {
            Endpoint::Closed => x <= self.psi_hi,
            Endpoint::Open => x < self.psi_hi,
        };
        above && below
    }

    /// Bracket pair such as `[)` or `(]`.
    pub fn openness(&self) -> String {
        let l = if self.lo == Endpoint::Closed { '[' } else { '(' };
        let r = if self.hi == Endpoint::Closed { ']' } else { ')' };
        format!("{l}{r}")
    }
}

fn parse_openness(s: &str) -> Option<(Endpoint, Endpoint)> {
    let mut c = s.trim().chars();
    let lo = match c.next()? {
        '[' => Endpoint::Closed,
        '(' => Endpoint::Open,
        _ => return None,
    };
    let hi = match c.next()? {
        ']' => Endpoint::Closed,
        ')' => Endpoint::Open,
        _ => return None,
    };
    c.next().is_none().then_some((lo, hi))
}

/// Settings behind a simulated α₁ table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    pub t: usize,
    pub reps: usize,
    pub seed: u64,
    pub alpha2: f64,
    pub target: f64,
    pub psi_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub grid: AbarGrid,
    pub candidates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Published,
    Calibrated(CalibrationMeta),
}

/// α₁ by `|ψ|` interval; the rows partition `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alpha1Table {
    pub rows: Vec<Alpha1Row>,
    pub provenance: Provenance,
}

impl Alpha1Table {
    pub fn new(rows: Vec<Alpha1Row>, provenance: Provenance) -> Result<Self> {
        let t = Self { rows, provenance };
        t.validate()?;
        Ok(t)
    }

    /// The published table. Its last row was computed over (0.95, 0.99] but
    /// is stated, and kept here, as (0.95, 1).
    pub fn published() -> Self {
        let r = Alpha1Row::new;
        let rows = vec![
            r(0.0, 0.05, "[)", 0.09),
            r(0.05, 0.1, "[)", 0.17),
            r(0.1, 0.15, "[)", 0.23),
            r(0.15, 0.2, "[)", 0.31),
            r(0.2, 0.25, "[)", 0.38),
            r(0.25, 0.3, "[)", 0.45),
            r(0.3, 0.4, "[]", 0.5),
            r(0.4, 0.45, "(]", 0.48),
            r(0.45, 0.5, "(]", 0.46),
            r(0.5, 0.55, "(]", 0.44),
            r(0.55, 0.6, "(]", 0.42),
            r(0.6, 0.65, "(]", 0.38),
            r(0.65, 0.7, "(]", 0.35),
            r(0.7, 0.75, "(]", 0.31),
            r(0.75, 0.8, "(]", 0.26),
            r(0.8, 0.85, "(]", 0.22),
            r(0.85, 0.9, "(]", 0.17),
            r(0.9, 0.95, "(]", 0.11),
            r(0.95, 1.0, "()", 0.05),
        ];
        Self::new(rows, Provenance::Published).expect("published table is a partition")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Table(m));
        let Some(first) = self.rows.first() else {
            return bad("alpha1 table has no rows".into());
        };
        if first.psi_lo != 0.0 || first.lo != Endpoint::Closed {
            return bad("first row must start at 0 inclusive".into());
        }
        let last = self.rows.last().expect("nonempty");
        if last.psi_hi != 1.0 || last.hi != Endpoint::Open {
            return bad("last row must end at 1 exclusive".into());
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !(row.alpha1 > 0.0 && row.alpha1 < 1.0) {
                return bad(format!("row {i}: alpha1 {} outside (0, 1)", row.alpha1));
            }
            if !(row.psi_lo < row.psi_hi) {
                return bad(format!("row {i}: empty interval"));
            }
        }
        for (i, w) in self.rows.windows(2).enumerate() {
            if w[0].psi_hi != w[1].psi_lo {
                return bad(format!("gap or overlap between rows {i} and {}", i + 1));
            }
            let closed = (w[0].hi == Endpoint::Closed) as u8 + (w[1].lo == Endpoint::Closed) as u8;
            if closed != 1 {
                return bad(format!("boundary {} must belong to exactly one row", w[0].psi_hi));
            }
        }
        Ok(())
    }

    /// α₁ for `|ψ̂| = psi_abs`. `psi_abs = 1` uses the last row.
    pub fn lookup(&self, psi_abs: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&psi_abs) {
            return Err(invalid(format!("|psi| must lie in [0, 1], got {psi_abs}")));
        }
        if psi_abs == 1.0 {
            return Ok(self.rows.last().expect("validated").alpha1);
        }
        self.rows
            .iter()
            .find(|r| r.contains(psi_abs))
            .map(|r| r.alpha1)
            .ok_or_else(|| Error::Table(format!("no row contains {psi_abs}")))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["psi_lo", "psi_hi", "openness", "alpha1"])?;
        for r in &self.rows {
            wtr.write_record([r.psi_lo.to_string(), r.psi_hi.to_string(), r.openness(), r.alpha1.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, provenance: Provenance) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            psi_lo: f64,
            psi_hi: f64,
            openness: String,
            alpha1: f64,
        }
        let mut rows = Vec::new();
        for raw in csv::Reader::from_reader(r).deserialize::<Raw>() {
            let raw = raw?;
            let (lo, hi) = parse_openness(&raw.openness)
                .ok_or_else(|| Error::Table(format!("bad openness '{}'", raw.openness)))?;
            rows.push(Alpha1Row { psi_lo: raw.psi_lo, psi_hi: raw.psi_hi, lo, hi, alpha1: raw.alpha1 });
        }
        Self::new(rows, provenance)
    }

    /// CSV plus `<path>.json` provenance sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        std::fs::write(sidecar(path), serde_json::to_string_pretty(&self.provenance)?)?;
        Ok(())
    }

    /// Loads a saved table; a missing sidecar is read as the published table.
    pub fn load(path: &Path) -> Result<Self> {
        let side = sidecar(path);
        let provenance = if side.exists() {
            serde_json::from_str(&std::fs::read_to_string(side)?)?
        } else {
            Provenance::Published
        };
        Self::read_csv(std::fs::File::open(path)?, provenance)
    }
}

/// Grid of ā values `lo, lo + step, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbarGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for AbarGrid {
    fn default() -> Self {
        Self { lo: -300.0, hi: 20.0, step: 1.0 }
    }
}

impl AbarGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let g = Self { lo, hi, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(invalid("abar grid needs finite lo <= hi"));
        }
        if !(self.step > 0.0) {
            return Err(invalid("abar grid step must be positive"));
        }
        if (self.hi - self.lo) / self.step > 1e7 {
            return Err(invalid("abar grid has too many points"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }

    /// Same centre and step, twice the span.
    pub fn doubled(&self) -> Self {
        let half = self.hi - self.lo;
        let mid = 0.5 * (self.lo + self.hi);
        Self { lo: mid - half, hi: mid + half, step: self.step }
    }

    /// Same range, half the step.
    pub fn refined(&self) -> Self {
        Self { step: self.step / 2.0, ..*self }
    }
}

/// Retained ā values from step 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub abar_values: Vec<f64>,
    pub grid: AbarGrid,
    pub alpha1_used: f64,
}

impl ConfidenceSet {
    pub fn is_empty(&self) -> bool {
        self.abar_values.is_empty()
    }

    pub fn rho_values(&self, t: usize) -> Vec<f64> {
        self.abar_values.iter().map(|a| 1.0 + a / t as f64).collect()
    }
}

/// Equal-tailed acceptance bounds `(cv(ā)_{α₁/2}, cv(ā)_{1−α₁/2})` for each
/// grid point.
pub fn acceptance_bounds(cvtab: &CriticalValueTable, points: &[f64], alpha1: f64) -> Result<Vec<(f64, f64)>> {
    check_level(alpha1, "alpha1")?;
    points
        .iter()
        .map(|&a| Ok((cvtab.quantile(a, alpha1 / 2.0)?, cvtab.quantile(a, 1.0 - alpha1 / 2.0)?)))
        .collect()
}

fn check_level(x: f64, name: &str) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(invalid(format!("{name} must lie in (0, 1), got {x}")));
    }
    Ok(())
}

pub fn confidence_set(y: &Series, alpha1: f64, grid: &AbarGrid, cvtab: &CriticalValueTable) -> Result<ConfidenceSet> {
    grid.validate()?;
    let est = rho_ols(y)?;
    let prec = est.precision()?;
    let t = y.t() as f64;
    let points = grid.points();
    let bounds = acceptance_bounds(cvtab, &points, alpha1)?;
    let abar_values = points
        .iter()
        .zip(&bounds)
        .filter(|(&a, &(lo, hi))| {
            let tr = (est.rho_hat - (1.0 + a / t)) * prec;
            lo <= tr && tr <= hi
        })
        .map(|(&a, _)| a)
        .collect();
    Ok(ConfidenceSet { abar_values, grid: *grid, alpha1_used: alpha1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Reject,
    FailToReject,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Reject => "Reject",
            Decision::FailToReject => "FailToReject",
        })
    }
}

impl FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Reject" => Ok(Decision::Reject),
            "FailToReject" => Ok(Decision::FailToReject),
            _ => Err(invalid(format!("unknown decision '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointStat {
    pub abar: f64,
    pub stat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub decision: Decision,
    pub kind: StatKind,
    /// Minimum statistic over the confidence set; `None` when it is empty.
    pub statistic_min: Option<f64>,
    pub cv_alpha2: f64,
    pub alpha2: f64,
    pub psi_hat: f64,
    pub rho_hat: f64,
    pub alpha1: f64,
    pub ci: ConfidenceSet,
    pub per_point: Option<Vec<PointStat>>,
    /// True when the grid had to be widened to find a nonempty set.
    pub grid_extended: bool,
    pub notes: Vec<String>,
}

impl TestReport {
    /// The decision implied by the other fields.
    pub fn implied_decision(&self) -> Decision {
        match self.statistic_min {
            Some(m) if !self.ci.is_empty() && m > self.cv_alpha2 => Decision::Reject,
            _ => Decision::FailToReject,
        }
    }
}

/// Two-step test with α₁ taken from `a1tab` at `|ψ̂(ρ̂)|`.
pub fn bonferroni_test(
    y: &Series,
    alpha2: f64,
    cvtab: &CriticalValueTable,
    a1tab: &Alpha1Table,
    grid: &AbarGrid,
    kind: StatKind,
) -> Result<TestReport> {
    let est = rho_ols(y)?;
    let nuis = nuisance_estimates(&residuals(y, est.rho_hat))?;
    let psi = nuis.psi()?;
    let alpha1 = a1tab.lookup(psi.abs())?;
    let mut report = bonferroni_test_with_alpha1(y, alpha1, alpha2, cvtab, grid, kind)?;
    if nuis.psi_clamped {
        report.notes.push("psi estimate was clamped into (-1, 1)".into());
    }
    if alpha2 != DEFAULT_ALPHA2 && a1tab.provenance == Provenance::Published {
        report.notes.push(format!("the published alpha1 table was calibrated for alpha2 = {DEFAULT_ALPHA2}"));
    }
    Ok(report)
}

/// Two-step test with a fixed α₁.
pub fn bonferroni_test_with_alpha1(
    y: &Series,
    alpha1: f64,
    alpha2: f64,
    cvtab: &CriticalValueTable,
    grid: &AbarGrid,
    kind: StatKind,
) -> Result<TestReport> {
    if !kind.is_modified() {
        return Err(invalid(format!("the Bonferroni test needs a modified statistic, got {kind}")));
    }
    check_level(alpha2, "alpha2")?;
    let est = rho_ols(y)?;
    let psi_hat = nuisance_estimates(&residuals(y, est.rho_hat))?.psi()?;
    let cv_alpha2 = kind.pivotal_critical_value(alpha2)?;
    let mut notes = Vec::new();

    let mut ci = confidence_set(y, alpha1, grid, cvtab)?;
    let mut grid_extended = false;
    if ci.is_empty() {
        let wider = grid.doubled();
        log::debug!("empty confidence set on [{}, {}]; retrying on [{}, {}]", grid.lo, grid.hi, wider.lo, wider.hi);
        ci = confidence_set(y, alpha1, &wider, cvtab)?;
        grid_extended = true;
        notes.push(format!("confidence set empty on the requested grid; extended to [{}, {}]", wider.lo, wider.hi));
    }
    if ci.is_empty() {
        log::debug!("confidence set still empty; not rejecting");
        notes.push("confidence set is empty: the data fit no local-to-unity rho; not rejecting".into());
        return Ok(TestReport {
            decision: Decision::FailToReject,
            kind,
            statistic_min: None,
            cv_alpha2,
            alpha2,
            psi_hat,
            rho_hat: est.rho_hat,
            alpha1,
            ci,
            per_point: Some(Vec::new()),
            grid_extended,
            notes,
        });
    }

    let ctx = StatContext::new(y);
    let t = y.t() as f64;
    let per_point = ci
        .abar_values
        .iter()
        .map(|&abar| Ok(PointStat { abar, stat: ctx.stat(1.0 + abar / t, kind)?.value }))
        .collect::<Result<Vec<_>>>()?;
    let statistic_min = per_point.iter().map(|p| p.stat).fold(f64::INFINITY, f64::min);
    let decision = if statistic_min > cv_alpha2 { Decision::Reject } else { Decision::FailToReject };
    Ok(TestReport {
        decision,
        kind,
        statistic_min: Some(statistic_min),
        cv_alpha2,
        alpha2,
        psi_hat,
        rho_hat: est.rho_hat,
        alpha1,
        ci,
        per_point: Some(per_point),
        grid_extended,
        notes,
    })
}

/// Settings for simulating α₁ values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub psi_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub t: usize,
    pub reps: usize,
    pub alpha2: f64,
    /// Largest acceptable worst-case null rejection rate.
    pub target: f64,
    pub grid: AbarGrid,
    pub seed: u64,
    pub candidates: Vec<f64>,
}

impl CalibrationConfig {
    /// Full-scale settings: T = 2000, 5000 paths, a in [−300, 10].
    pub fn full_scale(seed: u64) -> Self {
        let mut a_grid: Vec<f64> = (0..=29).map(|i| -300.0 + 10.0 * i as f64).collect();
        a_grid.extend([-5.0, 0.0, 5.0, 10.0]);
        Self {
            psi_grid: (0..20).map(|i| i as f64 * 0.05).collect(),
            a_grid,
            t: 2000,
            reps: 5000,
            alpha2: DEFAULT_ALPHA2,
            target: DEFAULT_ALPHA2,
            grid: AbarGrid::default(),
            seed,
            candidates: default_candidates(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.psi_grid.is_empty() || self.a_grid.is_empty() || self.candidates.is_empty() {
            return Err(invalid("psi, a and candidate grids must be nonempty"));
        }
        if self.psi_grid.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(invalid("psi grid values must lie in [0, 1)"));
        }
        if self.psi_grid[0] != 0.0 || !self.psi_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("psi grid must start at 0 and increase strictly"));
        }
        if !self.candidates.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("alpha1 candidates must increase strictly"));
        }
        for &c in &self.candidates {
            check_level(c, "alpha1 candidate")?;
        }
        if self.a_grid.iter().any(|a| !a.is_finite()) {
            return Err(invalid("a grid must be finite"));
        }
        if self.t < 10 || self.reps == 0 {
            return Err(invalid("calibration needs T >= 10 and reps >= 1"));
        }
        check_level(self.alpha2, "alpha2")?;
        if !(self.target > 0.0 && self.target <= 1.0) {
            return Err(invalid("target must lie in (0, 1]"));
        }
        self.grid.validate()
    }
}

/// α₁ candidates 0.01, 0.02, …, 0.60.
pub fn default_candidates() -> Vec<f64> {
    (1..=60).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub config: CalibrationConfig,
    /// `worst_rates[i][j]`: largest rejection rate over the a grid for
    /// `psi_grid[i]` and `candidates[j]`.
    pub worst_rates: Vec<Vec<f64>>,
    /// Selected α₁ per ψ; `None` when even the smallest candidate fails.
    pub selected: Vec<Option<f64>>,
}

impl CalibrationReport {
    /// Table with rows `[ψ_i, ψ_{i+1})`, the last ending at 1.
    pub fn table(&self) -> Result<Alpha1Table> {
        let psi = &self.config.psi_grid;
        let mut rows = Vec::with_capacity(psi.len());
        for (i, sel) in self.selected.iter().enumerate() {
            let alpha1 = sel.ok_or_else(|| {
                Error::Infeasible(format!(
                    "no alpha1 candidate keeps the worst-case rejection rate at psi = {} below {} (smallest rate {:.4})",
                    psi[i], self.config.target, self.worst_rates[i][0]
                ))
            })?;
            let hi = psi.get(i + 1).copied().unwrap_or(1.0);
            rows.push(Alpha1Row { psi_lo: psi[i], psi_hi: hi, lo: Endpoint::Closed, hi: Endpoint::Open, alpha1 });
        }
        let c = &self.config;
        Alpha1Table::new(
            rows,
            Provenance::Calibrated(CalibrationMeta {
                t: c.t,
                reps: c.reps,
                seed: c.seed,
                alpha2: c.alpha2,
                target: c.target,
                psi_grid: c.psi_grid.clone(),
                a_grid: c.a_grid.clone(),
                grid: c.grid,
                candidates: c.candidates.clone(),
            }),
        )
    }
}

/// Largest candidate such that it and every smaller candidate meet `target`.
fn select(rates: &[f64], candidates: &[f64], target: f64) -> Option<f64> {
    let n = rates.iter().take_while(|&&r| r <= target).count();
    (n > 0).then(|| candidates[n - 1])
}

/// Simulates null paths `y_t = (1 + a/T) y_{t-1} + ε_t`, `y_0 = 0`, with
/// normal ε, emulates each ψ by the η-replacement of `ε² − 1`, and records
/// the worst-case rejection rate of the W*-based test for every α₁ candidate.
///
/// Paths are shared across ψ and candidates, so comparisons between them
/// are not blurred by independent noise.
pub fn calibrate_alpha1(cfg: &CalibrationConfig, cvtab: &CriticalValueTable) -> Result<CalibrationReport> {
    cfg.validate()?;
    let points = cfg.grid.points();
    let bounds = cfg
        .candidates
        .iter()
        .map(|&c| acceptance_bounds(cvtab, &points, c))
        .collect::<Result<Vec<_>>>()?;
    let cv2 = StatKind::WaldStar.pivotal_critical_value(cfg.alpha2)?;
    let (np, nc) = (cfg.psi_grid.len(), cfg.candidates.len());

    let mut worst = vec![vec![0.0f64; nc]; np];
    for (ai, &a) in cfg.a_grid.iter().enumerate() {
        let seed = derive_seed(cfg.seed, ai as u64);
        let outcomes = par_replicate(cfg.reps, seed, |rng, _| {
            let eps = draw_eps(InnovationKind::Normal, cfg.t, rng);
            calibration_rep(&eps, cfg.t, a, &cfg.psi_grid, &points, &bounds, cv2)
        });
        let mut counts = vec![vec![0usize; nc]; np];
        for o in outcomes {
            for (row, rej) in counts.iter_mut().zip(o?) {
                for (c, r) in row.iter_mut().zip(rej) {
                    *c += r as usize;
                }
            }
        }
        for (w, row) in worst.iter_mut().zip(counts) {
            for (wv, c) in w.iter_mut().zip(row) {
                *wv = wv.max(c as f64 / cfg.reps as f64);
            }
        }
    }
    let selected = worst.iter().map(|r| select(r, &cfg.candidates, cfg.target)).collect();
    Ok(CalibrationReport { config: cfg.clone(), worst_rates: worst, selected })
}

/// Rejection indicators `[psi][candidate]` for one path.
fn calibration_rep(
    eps: &[f64],
    t: usize,
    a: f64,
    psi_grid: &[f64],
    points: &[f64],
    bounds: &[Vec<(f64, f64)>],
    cv2: f64,
) -> Result<Vec<Vec<bool>>> {
    let tf = t as f64;
    let y = Series::new(ar1_path(1.0 + a / tf, eps))
        .map_err(|_| Error::DegenerateSeries("calibration path overflowed".into()))?;
    let est = rho_ols(&y)?;
    let prec = est.precision()?;
    let tr: Vec<f64> = points.iter().map(|&ab| (est.rho_hat - (1.0 + ab / tf)) * prec).collect();
    let member: Vec<Vec<bool>> = bounds
        .iter()
        .map(|b| tr.iter().zip(b).map(|(&x, &(lo, hi))| lo <= x && x <= hi).collect())
        .collect();
    let used: Vec<usize> = (0..points.len()).filter(|&i| member.iter().any(|m| m[i])).collect();

    let ctx = StatContext::new(&y);
    let mut out = Vec::with_capacity(psi_grid.len());
    for &psi in psi_grid {
        let mut stat = vec![f64::NAN; points.len()];
        for &i in &used {
            let abar = points[i];
            let rho_bar = 1.0 + abar / tf;
            let z = residuals(&y, rho_bar);
            let z2 = replaced_z2(&y, eps, a, abar, psi)?;
            stat[i] = ctx.stat_from_parts(&z.z, &z2, rho_bar, StatKind::WaldStar)?.value;
        }
        out.push(
            member
                .iter()
                .map(|m| {
                    let mut any = false;
                    let mut min = f64::INFINITY;
                    for (i, _) in m.iter().enumerate().filter(|(_, &x)| x) {
                        any = true;
                        min = min.min(stat[i]);
                    }
                    any && min > cv2
                })
                .collect(),
        );
    }
    Ok(out)
}
