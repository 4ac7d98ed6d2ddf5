//! Simulated Brownian / Ornstein–Uhlenbeck functionals and the limiting
//! distributions assembled from them.
//!
//! Each replication runs an Euler scheme on the grid `0, 1/N, …, 1`:
//! `J_i = J_{i-1} + a J_{i-1}/N + ΔW_ε,i` with `J_0 = 0`. Time integrals
//! are left-point Riemann sums and stochastic integrals are `Σ f(r_{i-1}) ΔW_i`.
//! `W_η = ψ W_ε + √(1−ψ²) W_1`, with `W_1` independent of `W_ε`.

use std::io::{Read, Write};
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::par_replicate;
use crate::teststats::StatKind;

pub const MIN_STEPS: usize = 100;
pub const DEFAULT_TABLE_STEPS: usize = 2000;
pub const DEFAULT_TABLE_REPS: usize = 200_000;
pub const DEFAULT_FIGURE_REPS: usize = 100_000;
pub const TABLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub steps: usize,
    pub reps: usize,
    pub seed: u64,
    pub a: f64,
    pub psi: f64,
    /// Each Euler increment is the sum of this many finer Gaussian
    /// increments, so `(N, k)` and `(N·k, 1)` see the same Brownian path.
    #[serde(default = "one")]
    pub substeps: usize,
}

fn one() -> usize {
    1
}

impl PathConfig {
    pub fn new(steps: usize, reps: usize, seed: u64) -> Self {
        Self { steps, reps, seed, a: 0.0, psi: 0.0, substeps: 1 }
    }

    pub fn with_substeps(mut self, k: usize) -> Self {
        self.substeps = k;
        self
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn with_psi(mut self, psi: f64) -> Self {
        self.psi = psi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < MIN_STEPS {
            return Err(invalid(format!("steps must be at least {MIN_STEPS}, got {}", self.steps)));
        }
        if self.reps == 0 {
            return Err(invalid("reps must be at least 1"));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps must be at least 1"));
        }
        if !self.a.is_finite() {
            return Err(invalid("a must be finite"));
        }
        if !(self.psi.abs() < 1.0) {
            return Err(invalid(format!("psi must lie in (-1, 1), got {}", self.psi)));
        }
        Ok(())
    }
}

/// Which Brownian motion drives the stochastic integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    /// `W_η`, for the unmodified statistics.
    Eta,
    /// `W_1`, for the modified statistics.
    W1,
}

impl Noise {
    pub fn for_kind(kind: StatKind) -> Self {
        if kind.is_modified() {
            Noise::W1
        } else {
            Noise::Eta
        }
    }
}

/// Functionals from one replication. `J̃₁ = J − ∫J`, `J̃₂ = J² − ∫J²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalDraw {
    /// ∫ J̃₁ dW_η
    pub j1_dweta: f64,
    /// ∫ J̃₂ dW_η
    pub j2_dweta: f64,
    /// ∫ J̃₁ dW₁
    pub j1_dw1: f64,
    /// ∫ J̃₂ dW₁
    pub j2_dw1: f64,
    /// ∫ J̃₁²
    pub s11: f64,
    /// ∫ J̃₂²
    pub s22: f64,
    /// ∫ J̃₁ J̃₂
    pub s12: f64,
    /// ∫ J dW_ε
    pub j_dweps: f64,
    /// ∫ J²
    pub sjj: f64,
}

impl FunctionalDraw {
    pub fn j1_dw(&self, noise: Noise) -> f64 {
        match noise {
            Noise::Eta => self.j1_dweta,
            Noise::W1 => self.j1_dw1,
        }
    }

    pub fn j2_dw(&self, noise: Noise) -> f64 {
        match noise {
            Noise::Eta => self.j2_dweta,
            Noise::W1 => self.j2_dw1,
        }
    }

    /// ∫ Q dW with `Q = J̃₂ − (S12/S11) J̃₁`.
    pub fn q_dw(&self, noise: Noise) -> f64 {
        self.j2_dw(noise) - self.s12 / self.s11 * self.j1_dw(noise)
    }

    /// ∫ Q².
    pub fn sqq(&self) -> f64 {
        self.s22 - self.s12 * self.s12 / self.s11
    }

    /// Limit of the centered t-ratio for ρ: `∫J dW_ε / (∫J²)^{1/2}`.
    pub fn t_ratio(&self) -> f64 {
        self.j_dweps / self.sjj.sqrt()
    }
}

/// Simulates one replication on `steps` Euler steps.
fn simulate_draw<R: rand::Rng + ?Sized>(cfg: &PathConfig, rng: &mut R, path: &mut Vec<f64>) -> FunctionalDraw {
    let (steps, a, psi, k) = (cfg.steps, cfg.a, cfg.psi, cfg.substeps);
    let n = steps as f64;
    let sd = 1.0 / (n * k as f64).sqrt();
    let drift = 1.0 + a / n;
    let psi_c = (1.0 - psi * psi).sqrt();

    // path[i] = J(r_i), i = 0..N
    path.clear();
    path.push(0.0);
    let mut dweps = Vec::with_capacity(steps);
    let mut dw1 = Vec::with_capacity(steps);
    let mut j = 0.0;
    for _ in 0..steps {
        let (mut e, mut w) = (0.0, 0.0);
        for _ in 0..k {
            e += Distribution::<f64>::sample(&StandardNormal, rng);
            w += Distribution::<f64>::sample(&StandardNormal, rng);
        }
        let de = e * sd;
        dweps.push(de);
        dw1.push(w * sd);
        j = drift * j + de;
        path.push(j);
    }

    // left points J(r_0..r_{N-1})
    let left = &path[..steps];
    let m1 = left.iter().sum::<f64>() / n;
    let m2 = left.iter().map(|v| v * v).sum::<f64>() / n;
    let mut out = FunctionalDraw {
        j1_dweta: 0.0,
        j2_dweta: 0.0,
        j1_dw1: 0.0,
        j2_dw1: 0.0,
        s11: 0.0,
        s22: 0.0,
        s12: 0.0,
        j_dweps: 0.0,
        sjj: 0.0,
    };
    let (mut j1_dweps, mut j2_dweps) = (0.0, 0.0);
    for ((&jv, &de), &dw) in left.iter().zip(&dweps).zip(&dw1) {
        let x1 = jv - m1;
        let x2 = jv * jv - m2;
        j1_dweps += x1 * de;
        j2_dweps += x2 * de;
        out.j1_dw1 += x1 * dw;
        out.j2_dw1 += x2 * dw;
        out.s11 += x1 * x1;
        out.s22 += x2 * x2;
        out.s12 += x1 * x2;
        out.j_dweps += jv * de;
        out.sjj += jv * jv;
    }
    out.s11 /= n;
    out.s22 /= n;
    out.s12 /= n;
    out.sjj /= n;
    out.j1_dweta = psi * j1_dweps + psi_c * out.j1_dw1;
    out.j2_dweta = psi * j2_dweps + psi_c * out.j2_dw1;
    out
}

/// One [`FunctionalDraw`] per replication, in replication order.
pub fn draw_functionals(cfg: &PathConfig) -> Result<Vec<FunctionalDraw>> {
    cfg.validate()?;
    Ok(par_replicate(cfg.reps, cfg.seed, |rng, _| {
        let mut path = Vec::with_capacity(cfg.steps + 1);
        simulate_draw(cfg, rng, &mut path)
    }))
}

/// Local alternative and scaling for [`limit_stat`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    pub c2: f64,
    pub q: f64,
    /// σ²_ε / σ_η; 1/√2 for normal ε.
    pub ratio: f64,
    /// ψ; only enters the drift scale of the modified statistics.
    pub psi: f64,
}

impl LimitParams {
    pub fn null() -> Self {
        Self { c2: 0.0, q: 0.0, ratio: std::f64::consts::FRAC_1_SQRT_2, psi: 0.0 }
    }

    pub fn alternative(c2: f64, q: f64) -> Self {
        Self { c2, q, ..Self::null() }
    }

    fn drift_scale(&self, kind: StatKind) -> f64 {
        if kind.is_modified() {
            self.ratio / (1.0 - self.psi * self.psi).sqrt()
        } else {
            self.ratio
        }
    }
}

/// Limiting value of statistic `kind` for one draw under the local
/// alternative `(c², q)`.
pub fn limit_stat(draw: &FunctionalDraw, kind: StatKind, p: &LimitParams) -> Result<f64> {
    if !(p.c2 >= 0.0) {
        return Err(invalid("c2 must be nonnegative"));
    }
    if !(p.psi.abs() < 1.0) {
        return Err(invalid("psi must lie in (-1, 1)"));
    }
    let noise = Noise::for_kind(kind);
    let k = p.drift_scale(kind);
    let c = p.c2.sqrt();
    let degenerate = || Error::DegenerateSeries("functional draw has a zero denominator".into());
    match kind {
        StatKind::Ln | StatKind::LnStar => {
            if !(draw.s22 > 0.0) {
                return Err(degenerate());
            }
            let root = draw.s22.sqrt();
            Ok(draw.j2_dw(noise) / root + k * (p.c2 * draw.s22 + 2.0 * c * p.q * draw.s12) / root)
        }
        StatKind::AugT | StatKind::AugTStar => {
            let sqq = draw.sqq();
            if !(draw.s11 > 0.0 && sqq > 0.0) {
                return Err(degenerate());
            }
            Ok(draw.q_dw(noise) / sqq.sqrt() + k * p.c2 * sqq.sqrt())
        }
        StatKind::Wald | StatKind::WaldStar => {
            let det = draw.s11 * draw.s22 - draw.s12 * draw.s12;
            if !(det > 0.0) {
                return Err(degenerate());
            }
            let u1 = draw.j1_dw(noise) + k * (p.c2 * draw.s12 + 2.0 * c * p.q * draw.s11);
            let u2 = draw.j2_dw(noise) + k * (p.c2 * draw.s22 + 2.0 * c * p.q * draw.s12);
            Ok((draw.s22 * u1 * u1 - 2.0 * draw.s12 * u1 * u2 + draw.s11 * u2 * u2) / det)
        }
    }
}

/// Type-7 (linear interpolation) empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub steps: usize,
    pub reps: usize,
    pub seed: u64,
    pub version: u32,
}

/// Quantiles of the local-to-unity t-ratio limit, indexed by `(a, level)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValueTable {
    a_grid: Vec<f64>,
    levels: Vec<f64>,
    /// `quantiles[i][j]` for `a_grid[i]`, `levels[j]`.
    quantiles: Vec<Vec<f64>>,
    pub meta: TableMeta,
}

impl CriticalValueTable {
    pub fn from_parts(a_grid: Vec<f64>, levels: Vec<f64>, quantiles: Vec<Vec<f64>>, meta: TableMeta) -> Result<Self> {
        let t = Self { a_grid, levels, quantiles, meta };
        t.validate()?;
        Ok(t)
    }

    pub fn a_grid(&self) -> &[f64] {
        &self.a_grid
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn validate(&self) -> Result<()> {
        if self.a_grid.is_empty() || self.levels.is_empty() {
            return Err(Error::Table("critical value table is empty".into()));
        }
        if !self.a_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Table("a grid must be strictly increasing".into()));
        }
        if !self.levels.windows(2).all(|w| w[0] < w[1]) || self.levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return Err(Error::Table("levels must be strictly increasing inside (0, 1)".into()));
        }
        if self.quantiles.len() != self.a_grid.len() || self.quantiles.iter().any(|r| r.len() != self.levels.len()) {
            return Err(Error::Table("quantile matrix shape does not match grids".into()));
        }
        for (a, row) in self.a_grid.iter().zip(&self.quantiles) {
            if row.iter().any(|q| !q.is_finite()) {
                return Err(Error::Table(format!("non-finite quantile at a = {a}")));
            }
            if !row.windows(2).all(|w| w[0] <= w[1]) {
                return Err(Error::Table(format!("quantiles are not monotone in level at a = {a}")));
            }
        }
        Ok(())
    }

    /// Quantile at `(a, level)`, linear in `a` between grid points and in
    /// `level` between stored levels. Values of `a` beyond the grid use the
    /// nearest end.
    pub fn quantile(&self, a: f64, level: f64) -> Result<f64> {
        let (j0, j1, wl) = bracket(&self.levels, level)
            .ok_or_else(|| Error::Table(format!("level {level} outside the table's range")))?;
        let (i0, i1, wa) = bracket_clamped(&self.a_grid, a);
        let at = |i: usize| self.quantiles[i][j0] + wl * (self.quantiles[i][j1] - self.quantiles[i][j0]);
        Ok(at(i0) + wa * (at(i1) - at(i0)))
    }

    /// Writes `a,level,quantile` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["a", "level", "quantile"])?;
        for (a, row) in self.a_grid.iter().zip(&self.quantiles) {
            for (l, q) in self.levels.iter().zip(row) {
                wtr.write_record([a.to_string(), l.to_string(), format!("{q:.17e}")])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads rows written by [`Self::write_csv`] and validates them.
    pub fn read_csv<R: Read>(r: R, meta: TableMeta) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Table("short row".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Table(format!("bad number: {e}")))
            };
            rows.push((parse(0)?, parse(1)?, parse(2)?));
        }
        let mut a_grid: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut levels: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for g in [&mut a_grid, &mut levels] {
            g.sort_by(|a, b| a.total_cmp(b));
            g.dedup();
        }
        let mut quantiles = vec![vec![f64::NAN; levels.len()]; a_grid.len()];
        for (a, l, q) in rows {
            let i = a_grid.iter().position(|&x| x == a).expect("collected");
            let j = levels.iter().position(|&x| x == l).expect("collected");
            quantiles[i][j] = q;
        }
        Self::from_parts(a_grid, levels, quantiles, meta)
    }

    /// CSV plus `<path>.json` metadata sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        std::fs::write(sidecar(path), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: TableMeta = serde_json::from_str(&std::fs::read_to_string(sidecar(path))?)?;
        Self::read_csv(std::fs::File::open(path)?, meta)
    }

    /// Table shipped with the crate (built by `rca cvtable` with the
    /// default grids).
    pub fn shipped() -> Self {
        let meta: TableMeta = serde_json::from_str(SHIPPED_META).expect("shipped meta parses");
        Self::read_csv(SHIPPED_CSV.as_bytes(), meta).expect("shipped table is valid")
    }
}

const SHIPPED_CSV: &str = include_str!("../data/cvtable.csv");
const SHIPPED_META: &str = include_str!("../data/cvtable.csv.json");

pub(crate) fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Indices and weight for linear interpolation; `None` outside the grid.
fn bracket(grid: &[f64], x: f64) -> Option<(usize, usize, f64)> {
    const EPS: f64 = 1e-12;
    let first = *grid.first()?;
    let last = *grid.last()?;
    if x < first - EPS || x > last + EPS {
        return None;
    }
    Some(bracket_clamped(grid, x))
}

fn bracket_clamped(grid: &[f64], x: f64) -> (usize, usize, f64) {
    let n = grid.len();
    if n == 1 || x <= grid[0] {
        return (0, 0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let hi = grid.partition_point(|&g| g <= x);
    let lo = hi - 1;
    let w = (x - grid[lo]) / (grid[hi] - grid[lo]);
    (lo, hi, w)
}

/// Default a grid for critical-value tables: dense near zero, sparse in the
/// stationary region.
pub fn default_a_grid() -> Vec<f64> {
    vec![
        -300.0, -250.0, -200.0, -175.0, -150.0, -125.0, -100.0, -90.0, -80.0, -70.0, -60.0, -50.0, -45.0, -40.0,
        -35.0, -30.0, -25.0, -20.0, -17.5, -15.0, -12.5, -10.0, -8.0, -6.0, -5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0,
        2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.5, 15.0, 20.0,
    ]
}

/// Default levels: both tails at 0.5% steps, covering `α₁/2` and `1 − α₁/2`
/// for every α₁ in 0.01..=0.60.
pub fn default_levels() -> Vec<f64> {
    let lower: Vec<f64> = (1..=60).map(|i| i as f64 * 0.005).collect();
    let mut all = lower.clone();
    all.extend(lower.iter().rev().map(|l| round12(1.0 - l)));
    all
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Simulated quantiles of the t-ratio limit for every `a` in `a_grid`.
/// `cfg.a` and `cfg.psi` are ignored.
pub fn build_cv_table(a_grid: &[f64], levels: &[f64], cfg: &PathConfig) -> Result<CriticalValueTable> {
    cfg.validate()?;
    if levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(invalid("levels must lie in (0, 1)"));
    }
    let mut a_sorted = a_grid.to_vec();
    a_sorted.sort_by(|a, b| a.total_cmp(b));
    a_sorted.dedup();
    let mut lv = levels.to_vec();
    lv.sort_by(|a, b| a.total_cmp(b));
    lv.dedup();
    let mut quantiles = Vec::with_capacity(a_sorted.len());
    for (i, &a) in a_sorted.iter().enumerate() {
        let c = PathConfig { a, psi: 0.0, seed: crate::rng::derive_seed(cfg.seed, i as u64), ..*cfg };
        let t = sorted(draw_functionals(&c)?.iter().map(FunctionalDraw::t_ratio).collect());
        quantiles.push(lv.iter().map(|&l| quantile_sorted(&t, l)).collect());
    }
    CriticalValueTable::from_parts(
        a_sorted,
        lv,
        quantiles,
        TableMeta { steps: cfg.steps, reps: cfg.reps, seed: cfg.seed, version: TABLE_FORMAT_VERSION },
    )
}

/// Upper-tail critical value used for power calculations: pivotal for the
/// modified kinds and at ψ = 0, otherwise the simulated null quantile.
pub fn power_critical_value(draws: &[FunctionalDraw], kind: StatKind, psi: f64, ratio: f64, level: f64) -> Result<f64> {
    if kind.is_modified() || psi == 0.0 {
        return kind.pivotal_critical_value(level);
    }
    let p = LimitParams { c2: 0.0, q: 0.0, ratio, psi };
    let null: Result<Vec<f64>> = draws.iter().map(|d| limit_stat(d, kind, &p)).collect();
    Ok(quantile_sorted(&sorted(null?), 1.0 - level))
}

/// Rejection frequencies over `c2_grid` from precomputed draws.
pub fn power_curve_from_draws(
    draws: &[FunctionalDraw],
    kind: StatKind,
    psi: f64,
    q: f64,
    ratio: f64,
    c2_grid: &[f64],
    level: f64,
) -> Result<Vec<f64>> {
    let cv = power_critical_value(draws, kind, psi, ratio, level)?;
    c2_grid
        .iter()
        .map(|&c2| {
            let p = LimitParams { c2, q, ratio, psi };
            let mut hits = 0usize;
            for d in draws {
                if limit_stat(d, kind, &p)? > cv {
                    hits += 1;
                }
            }
            Ok(hits as f64 / draws.len() as f64)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn asymptotic_power_curve(
    kind: StatKind,
    a: f64,
    psi: f64,
    q: f64,
    ratio: f64,
    c2_grid: &[f64],
    level: f64,
    cfg: &PathConfig,
) -> Result<Vec<f64>> {
    let draws = draw_functionals(&PathConfig { a, psi, ..*cfg })?;
    power_curve_from_draws(&draws, kind, psi, q, ratio, c2_grid, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mean(x: impl Iterator<Item = f64>) -> f64 {
        let v: Vec<f64> = x.collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn config_validation() {
        assert!(PathConfig::new(50, 10, 1).validate().is_err());
        assert!(PathConfig::new(100, 0, 1).validate().is_err());
        assert!(PathConfig::new(100, 1, 1).with_psi(1.0).validate().is_err());
        assert!(PathConfig::new(100, 1, 1).validate().is_ok());
    }

    #[test]
    fn draws_are_reproducible() {
        let cfg = PathConfig::new(200, 50, 4).with_a(-3.0).with_psi(0.4);
        assert_eq!(draw_functionals(&cfg).unwrap(), draw_functionals(&cfg).unwrap());
    }

    #[test]
    fn cauchy_schwarz_holds_per_draw() {
        for d in draw_functionals(&PathConfig::new(100, 500, 2).with_a(-20.0)).unwrap() {
            assert!(d.s11 >= 0.0 && d.s22 >= 0.0 && d.sjj >= 0.0);
            assert!(d.s12 * d.s12 <= d.s11 * d.s22 * (1.0 + 1e-12));
            assert!(d.sqq() >= -1e-12 * d.s22);
        }
    }

    #[test]
    fn demeaned_bm_variance_mean() {
        // E ∫ (W − ∫W)² = 1/2 − 1/3 = 1/6; the left-point grid mean is
        // (N²−1)/(6N²), so the discretization bias is O(N⁻²).
        let draws = draw_functionals(&PathConfig::new(200, 100_000, 9)).unwrap();
        let m = mean(draws.iter().map(|d| d.s11));
        assert!((m - 1.0 / 6.0).abs() < 0.005, "{m}");
    }

    #[test]
    fn w1_integrals_uncorrelated_with_t_ratio_numerator() {
        let draws = draw_functionals(&PathConfig::new(100, 100_000, 10)).unwrap();
        let x: Vec<f64> = draws.iter().map(|d| d.j_dweps).collect();
        let y: Vec<f64> = draws.iter().map(|d| d.j1_dw1).collect();
        let (mx, my) = (mean(x.iter().copied()), mean(y.iter().copied()));
        let cov = mean(x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)));
        let vx = mean(x.iter().map(|a| (a - mx).powi(2)));
        let vy = mean(y.iter().map(|b| (b - my).powi(2)));
        assert!((cov / (vx * vy).sqrt()).abs() < 0.01);
    }

    #[test]
    fn null_forms() {
        let draws = draw_functionals(&PathConfig::new(100, 200, 3).with_psi(0.3)).unwrap();
        let p = LimitParams { q: 2.0, ..LimitParams::null() };
        for d in &draws {
            let ln = limit_stat(d, StatKind::Ln, &LimitParams::null()).unwrap();
            assert_relative_eq!(ln, d.j2_dweta / d.s22.sqrt(), max_relative = 1e-12);
            let t = limit_stat(d, StatKind::AugT, &p).unwrap();
            assert_eq!(t, d.q_dw(Noise::Eta) / d.sqq().sqrt());
            let ts = limit_stat(d, StatKind::AugTStar, &p).unwrap();
            assert_eq!(ts, d.q_dw(Noise::W1) / d.sqq().sqrt());
        }
    }

    #[test]
    fn wald_limit_matches_explicit_inverse() {
        let d = draw_functionals(&PathConfig::new(100, 1, 5)).unwrap()[0];
        let p = LimitParams::alternative(10.0, 1.5);
        let k = p.ratio;
        let c = 10f64.sqrt();
        let u = [
            d.j1_dweta + k * (10.0 * d.s12 + 2.0 * c * 1.5 * d.s11),
            d.j2_dweta + k * (10.0 * d.s22 + 2.0 * c * 1.5 * d.s12),
        ];
        let det = d.s11 * d.s22 - d.s12 * d.s12;
        let inv = [[d.s22 / det, -d.s12 / det], [-d.s12 / det, d.s11 / det]];
        let expect = u[0] * (inv[0][0] * u[0] + inv[0][1] * u[1]) + u[1] * (inv[1][0] * u[0] + inv[1][1] * u[1]);
        assert_relative_eq!(limit_stat(&d, StatKind::Wald, &p).unwrap(), expect, max_relative = 1e-10);
    }

    #[test]
    fn quantile_interpolation() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert_eq!(quantile_sorted(&s, 0.625), 3.5);
        assert_eq!(quantile_sorted(&s, 1.0), 5.0);
    }

    #[test]
    fn default_levels_cover_alpha_grid() {
        let lv = default_levels();
        assert_eq!(lv.len(), 120);
        assert!(lv.windows(2).all(|w| w[0] < w[1]));
        for i in 1..=60 {
            let a1 = i as f64 / 100.0;
            assert!(lv.iter().any(|&l| (l - a1 / 2.0).abs() < 1e-12));
            assert!(lv.iter().any(|&l| (l - (1.0 - a1 / 2.0)).abs() < 1e-12));
        }
    }

    #[test]
    fn table_lookup_and_round_trip() {
        let cfg = PathConfig::new(100, 2000, 1);
        let tab = build_cv_table(&[-10.0, 0.0], &[0.05, 0.5, 0.95], &cfg).unwrap();
        let q0 = tab.quantile(0.0, 0.05).unwrap();
        let q10 = tab.quantile(-10.0, 0.05).unwrap();
        assert_relative_eq!(tab.quantile(-5.0, 0.05).unwrap(), 0.5 * (q0 + q10), max_relative = 1e-12);
        assert_eq!(tab.quantile(-50.0, 0.05).unwrap(), q10);
        assert!(tab.quantile(0.0, 0.01).is_err());
        let mid = tab.quantile(0.0, 0.275).unwrap();
        let expect = 0.5 * (q0 + tab.quantile(0.0, 0.5).unwrap());
        assert_relative_eq!(mid, expect, max_relative = 1e-12);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cv.csv");
        tab.save(&path).unwrap();
        let back = CriticalValueTable::load(&path).unwrap();
        assert_eq!(back, tab);
        assert_eq!(back.meta.reps, 2000);
    }

    #[test]
    fn loading_rejects_non_monotone_table() {
        let csv = "a,level,quantile\n0,0.05,1.0\n0,0.95,-1.0\n";
        let meta = TableMeta { steps: 100, reps: 1, seed: 0, version: 1 };
        assert!(matches!(CriticalValueTable::read_csv(csv.as_bytes(), meta), Err(Error::Table(_))));
    }

    #[test]
    fn shipped_table_is_valid() {
        let t = CriticalValueTable::shipped();
        assert_eq!(t.a_grid(), default_a_grid().as_slice());
        assert_eq!(t.levels().len(), default_levels().len());
        assert!(t.quantile(-300.0, 0.025).unwrap() < -1.8);
    }

    #[test]
    fn power_at_the_null_is_the_level() {
        let cfg = PathConfig::new(200, 20_000, 12);
        for kind in [StatKind::LnStar, StatKind::WaldStar] {
            let p = asymptotic_power_curve(kind, 0.0, 0.0, 1.0, LimitParams::null().ratio, &[0.0], 0.05, &cfg).unwrap();
            assert!((p[0] - 0.05).abs() < 0.01, "{kind}: {}", p[0]);
        }
    }
}
