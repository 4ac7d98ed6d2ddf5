//! Innovation generation and sample paths for the local-to-unity RCA(1) model
//!
//! `y_t = (ρ_T + ω_T v_t) y_{t-1} + ε_t` with `ρ_T = 1 + a/T` and
//! `ω_T = c / T^{3/4}`, plus the η-replacement device used when calibrating
//! the Bonferroni significance levels for ψ ≠ 0.

use std::io::Write;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::child_rng;

/// Marginal law of ε_t. Both kinds have mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationKind {
    Normal,
    /// `(χ²(df) − df) / √(2 df)`.
    StdChiSq { df: u32 },
}

impl InnovationKind {
    /// Population ψ = Corr(ε, ε² − 1).
    pub fn population_psi(&self) -> f64 {
        match *self {
            InnovationKind::Normal => 0.0,
            InnovationKind::StdChiSq { df } => {
                let k = df as f64;
                (8.0 / k).sqrt() / (12.0 / k + 2.0).sqrt()
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            InnovationKind::Normal => "normal".to_string(),
            InnovationKind::StdChiSq { df } => format!("chisq{df}"),
        }
    }
}

/// How Corr(ε, v) is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum CorrSpec {
    /// A fixed finite-sample correlation.
    Fixed(f64),
    /// Localized correlation `q · T^{-1/4}`.
    Localized(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub kind: InnovationKind,
    pub corr: CorrSpec,
}

impl Default for InnovationSpec {
    fn default() -> Self {
        Self::normal()
    }
}

impl InnovationSpec {
    pub fn normal() -> Self {
        Self { kind: InnovationKind::Normal, corr: CorrSpec::Fixed(0.0) }
    }

    pub fn std_chisq(df: u32) -> Self {
        Self { kind: InnovationKind::StdChiSq { df }, corr: CorrSpec::Fixed(0.0) }
    }

    pub fn with_corr(mut self, corr: f64) -> Self {
        self.corr = CorrSpec::Fixed(corr);
        self
    }

    pub fn with_localized_corr(mut self, q: f64) -> Self {
        self.corr = CorrSpec::Localized(q);
        self
    }

    /// Corr(ε, v) at sample size `t`, validated.
    pub fn effective_corr(&self, t: usize) -> Result<f64> {
        if let InnovationKind::StdChiSq { df } = self.kind {
            if df == 0 {
                return Err(invalid("chi-square innovations need df >= 1"));
            }
        }
        let corr = match self.corr {
            CorrSpec::Fixed(c) => c,
            CorrSpec::Localized(q) => q * (t as f64).powf(-0.25),
        };
        if !corr.is_finite() || corr.abs() > 1.0 {
            return Err(invalid(format!("|Corr(eps, v)| = {corr} exceeds 1 at T = {t}")));
        }
        if corr != 0.0 && self.kind != InnovationKind::Normal {
            return Err(invalid("correlated (eps, v) pairs are only available for normal innovations"));
        }
        Ok(corr)
    }
}

/// One draw of the innovation sequences, each of length T.
#[derive(Debug, Clone, PartialEq)]
pub struct Innovations {
    pub eps: Vec<f64>,
    pub v: Vec<f64>,
}

/// Deterministic innovation draw for `(spec, t, seed)`.
pub fn gen_innovations(spec: &InnovationSpec, t: usize, seed: u64) -> Result<Innovations> {
    let mut rng = child_rng(seed, 0);
    gen_innovations_with(spec, t, &mut rng)
}

/// Same as [`gen_innovations`] but drawing from a caller-owned generator.
pub fn gen_innovations_with<R: Rng + ?Sized>(
    spec: &InnovationSpec,
    t: usize,
    rng: &mut R,
) -> Result<Innovations> {
    if t == 0 {
        return Err(invalid("T must be at least 1"));
    }
    let corr = spec.effective_corr(t)?;
    let eps = draw_eps(spec.kind, t, rng);
    let w: Vec<f64> = (0..t).map(|_| StandardNormal.sample(rng)).collect();
    let v = if corr == 0.0 {
        w
    } else {
        let s = (1.0 - corr * corr).sqrt();
        eps.iter().zip(&w).map(|(e, w)| corr * e + s * w).collect()
    };
    Ok(Innovations { eps, v })
}

/// ε only; cheaper when v is not needed (ω = 0 designs).
pub(crate) fn draw_eps<R: Rng + ?Sized>(kind: InnovationKind, t: usize, rng: &mut R) -> Vec<f64> {
    match kind {
        InnovationKind::Normal => (0..t).map(|_| StandardNormal.sample(rng)).collect(),
        InnovationKind::StdChiSq { df } => {
            let k = df as f64;
            let chi = ChiSquared::new(k).expect("df validated");
            let scale = (2.0 * k).sqrt();
            (0..t).map(|_| (chi.sample(rng) - k) / scale).collect()
        }
    }
}

/// Model parameters. Drift is given as ρ or as a (ρ_T = 1 + a/T), the
/// coefficient randomness as ω² or as c² (ω²_T = c²/T^{3/2}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcaParams {
    pub t: usize,
    pub rho: Option<f64>,
    pub a: Option<f64>,
    pub omega2: Option<f64>,
    pub c2: Option<f64>,
    pub y0: f64,
}

const PARAM_AGREEMENT_TOL: f64 = 1e-9;

impl RcaParams {
    /// Unit root, no randomness, y0 = 0.
    pub fn new(t: usize) -> Self {
        Self { t, rho: None, a: None, omega2: None, c2: None, y0: 0.0 }
    }

    pub fn rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn a(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }

    pub fn omega2(mut self, omega2: f64) -> Self {
        self.omega2 = Some(omega2);
        self
    }

    pub fn c2(mut self, c2: f64) -> Self {
        self.c2 = Some(c2);
        self
    }

    pub fn y0(mut self, y0: f64) -> Self {
        self.y0 = y0;
        self
    }

    /// Resolves `(ρ_T, ω_T)`.
    pub fn resolve(&self) -> Result<(f64, f64)> {
        if self.t == 0 {
            return Err(invalid("T must be at least 1"));
        }
        let tf = self.t as f64;
        let rho = match (self.rho, self.a) {
            (Some(r), Some(a)) => {
                let from_a = 1.0 + a / tf;
                if (r - from_a).abs() > PARAM_AGREEMENT_TOL * (1.0 + r.abs()) {
                    return Err(invalid(format!("rho = {r} disagrees with 1 + a/T = {from_a}")));
                }
                r
            }
            (Some(r), None) => r,
            (None, Some(a)) => 1.0 + a / tf,
            (None, None) => 1.0,
        };
        let omega2 = match (self.omega2, self.c2) {
            (Some(w), Some(c2)) => {
                let from_c2 = c2 / tf.powf(1.5);
                if (w - from_c2).abs() > PARAM_AGREEMENT_TOL * (1.0 + w.abs()) {
                    return Err(invalid(format!("omega2 = {w} disagrees with c2/T^1.5 = {from_c2}")));
                }
                w
            }
            (Some(w), None) => w,
            (None, Some(c2)) => {
                if c2 < 0.0 {
                    return Err(invalid("c2 must be nonnegative"));
                }
                c2 / tf.powf(1.5)
            }
            (None, None) => 0.0,
        };
        if !(omega2 >= 0.0) || !rho.is_finite() || !self.y0.is_finite() {
            return Err(invalid("omega2 must be nonnegative and rho, y0 finite"));
        }
        Ok((rho, omega2.sqrt()))
    }
}

/// An observed or simulated path `y_0, …, y_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Series {
    values: Vec<f64>,
}

impl Series {
    /// Requires at least two finite values (T ≥ 1).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid(format!("a series needs at least 2 values, got {}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at index {i}")));
        }
        Ok(Self { values })
    }

    /// Sample size T (number of transitions).
    pub fn t(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `y_0, …, y_{T-1}`.
    pub fn lagged(&self) -> &[f64] {
        &self.values[..self.values.len() - 1]
    }

    /// `y_1, …, y_T`.
    pub fn current(&self) -> &[f64] {
        &self.values[1..]
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Series::new(self.values.iter().map(|v| v * k).collect())
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Single-column CSV with header `y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["y"])?;
        for v in &self.values {
            wtr.write_record([v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Series {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Series::new(values)
    }
}

impl From<Series> for Vec<f64> {
    fn from(s: Series) -> Self {
        s.values
    }
}

/// Runs the recursion `y_t = (ρ_T + ω_T v_t) y_{t-1} + ε_t`.
pub fn simulate_rca(params: &RcaParams, eps: &[f64], v: &[f64]) -> Result<Series> {
    let t = params.t;
    if eps.len() != t {
        return Err(Error::LengthMismatch { expected: t, found: eps.len() });
    }
    if v.len() != t {
        return Err(Error::LengthMismatch { expected: t, found: v.len() });
    }
    let (rho, omega) = params.resolve()?;
    let mut y = Vec::with_capacity(t + 1);
    let mut prev = params.y0;
    y.push(prev);
    if omega == 0.0 {
        for &e in eps {
            prev = rho * prev + e;
            y.push(prev);
        }
    } else {
        for (&e, &vt) in eps.iter().zip(v) {
            prev = (rho + omega * vt) * prev + e;
            y.push(prev);
        }
    }
    Series::new(y).map_err(|_| Error::DegenerateSeries("simulated path overflowed".into()))
}

/// AR(1) path with y0 = 0 and no coefficient randomness.
pub(crate) fn ar1_path(rho: f64, eps: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(eps.len() + 1);
    let mut prev = 0.0;
    y.push(prev);
    for &e in eps {
        prev = rho * prev + e;
        y.push(prev);
    }
    y
}

fn check_psi(psi: f64) -> Result<()> {
    if !(psi.abs() < 1.0) {
        return Err(invalid(format!("psi must lie in (-1, 1), got {psi}")));
    }
    Ok(())
}

/// `η^rep_t = √(1−ψ²)(ε_t² − 1) + ψ√2 ε_t` for unit-variance ε.
pub fn eta_replacement(eps: &[f64], psi: f64) -> Result<Vec<f64>> {
    check_psi(psi)?;
    let s = (1.0 - psi * psi).sqrt();
    let k = psi * std::f64::consts::SQRT_2;
    Ok(eps.iter().map(|e| s * (e * e - 1.0) + k * e).collect())
}

/// Squared residuals at `ρ̄ = 1 + ā/T` for a path generated with drift `a`,
/// with ε_t² − 1 swapped for the replacement η^rep_t.
pub fn replaced_z2(y: &Series, eps: &[f64], a: f64, abar: f64, psi: f64) -> Result<Vec<f64>> {
    check_psi(psi)?;
    let t = y.t();
    if eps.len() != t {
        return Err(Error::LengthMismatch { expected: t, found: eps.len() });
    }
    let eta = eta_replacement(eps, psi)?;
    let d = abar / t as f64 - a / t as f64;
    Ok(y
        .lagged()
        .iter()
        .zip(eps)
        .zip(&eta)
        .map(|((&yl, &e), &h)| 1.0 + h + d * d * yl * yl - 2.0 * d * yl * e)
        .collect())
}
