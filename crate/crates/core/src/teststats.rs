//! LN, augmented t and augmented Wald statistics, each with its ψ-free
//! modified counterpart.
//!
//! Every statistic is built from the regression of `z_t²` (or the modified
//! `z_t²*`) on demeaned `y_{t-1}` and `y²_{t-1}`. The demeaned regressors
//! and their Gram matrix depend only on the series, so they are computed
//! once in [`LagDesign`] and shared by all statistics and all hypothetical ρ.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::{residuals, NuisanceEstimates, Residuals};
use crate::simulate::Series;

/// Relative determinant below which the 2×2 Gram matrix counts as singular.
pub const RANK_TOL: f64 = 1e-12;

/// Residual variance below this fraction of the regressand's variance is
/// treated as zero.
pub const EXACT_FIT_TOL: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatKind {
    #[serde(rename = "LN")]
    Ln,
    #[serde(rename = "LNstar")]
    LnStar,
    AugT,
    #[serde(rename = "AugTstar")]
    AugTStar,
    Wald,
    WaldStar,
}

impl StatKind {
    pub const ALL: [StatKind; 6] =
        [StatKind::Ln, StatKind::LnStar, StatKind::AugT, StatKind::AugTStar, StatKind::Wald, StatKind::WaldStar];

    pub fn is_modified(self) -> bool {
        matches!(self, StatKind::LnStar | StatKind::AugTStar | StatKind::WaldStar)
    }

    pub fn is_wald(self) -> bool {
        matches!(self, StatKind::Wald | StatKind::WaldStar)
    }

    pub fn modified(self) -> StatKind {
        match self {
            StatKind::Ln | StatKind::LnStar => StatKind::LnStar,
            StatKind::AugT | StatKind::AugTStar => StatKind::AugTStar,
            StatKind::Wald | StatKind::WaldStar => StatKind::WaldStar,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StatKind::Ln => "LN",
            StatKind::LnStar => "LNstar",
            StatKind::AugT => "AugT",
            StatKind::AugTStar => "AugTstar",
            StatKind::Wald => "Wald",
            StatKind::WaldStar => "WaldStar",
        }
    }

    /// Upper-tail critical value from the pivotal null: χ²(2) for the Wald
    /// kinds, N(0,1) otherwise.
    pub fn pivotal_critical_value(self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level < 1.0) {
            return Err(invalid(format!("level must lie in (0, 1), got {level}")));
        }
        Ok(if self.is_wald() { chi2_2_upper(level) } else { normal_upper(level) })
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', '_', '*'], "");
        Ok(match norm.as_str() {
            "ln" => StatKind::Ln,
            "lnstar" => StatKind::LnStar,
            "augt" | "t" => StatKind::AugT,
            "augtstar" | "tstar" => StatKind::AugTStar,
            "wald" | "w" => StatKind::Wald,
            "waldstar" | "wstar" => StatKind::WaldStar,
            _ => return Err(invalid(format!("unknown statistic kind '{s}'"))),
        })
    }
}

/// Upper-`level` quantile of χ²(2), i.e. `−2 ln(level)`.
pub fn chi2_2_upper(level: f64) -> f64 {
    -2.0 * level.ln()
}

/// Upper-`level` quantile of N(0, 1).
pub fn normal_upper(level: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(1.0 - level)
}

/// Eq.-(9)-style modification `z²* = (z² − σ̂_η ψ̂ z / σ̂_ε) / √(1 − ψ̂²)`.
pub fn modify_z2(z: &Residuals, nuis: &NuisanceEstimates) -> Result<Vec<f64>> {
    modify_parts(&z.z, &z.squared(), nuis)
}

pub(crate) fn modify_parts(z: &[f64], z2: &[f64], nuis: &NuisanceEstimates) -> Result<Vec<f64>> {
    let psi = nuis.psi().map_err(|e| Error::ModificationDegenerate(e.to_string()))?;
    if !(psi.abs() < 1.0) {
        return Err(Error::ModificationDegenerate(format!("|psi_hat| = {} is not below 1", psi.abs())));
    }
    if !(nuis.sigma_eps2 > 0.0) {
        return Err(Error::ModificationDegenerate("sigma_eps2 is zero".into()));
    }
    let k = nuis.sigma_eta2.sqrt() * psi / nuis.sigma_eps2.sqrt();
    let scale = (1.0 - psi * psi).sqrt();
    Ok(z.iter().zip(z2).map(|(&zt, &z2t)| (z2t - k * zt) / scale).collect())
}

/// Demeaned lag regressors `ỹ_{t-1}`, `ỹ²_{t-1}` and their cross products.
#[derive(Debug, Clone)]
pub struct LagDesign {
    x1: Vec<f64>,
    x2: Vec<f64>,
    s11: f64,
    s12: f64,
    s22: f64,
}

impl LagDesign {
    pub fn new(y: &Series) -> Self {
        let lag = y.lagged();
        let tf = lag.len() as f64;
        let m1 = lag.iter().sum::<f64>() / tf;
        let m2 = lag.iter().map(|v| v * v).sum::<f64>() / tf;
        let x1: Vec<f64> = lag.iter().map(|v| v - m1).collect();
        let x2: Vec<f64> = lag.iter().map(|v| v * v - m2).collect();
        let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
        for (a, b) in x1.iter().zip(&x2) {
            s11 += a * a;
            s12 += a * b;
            s22 += b * b;
        }
        Self { x1, x2, s11, s12, s22 }
    }

    pub fn t(&self) -> usize {
        self.x1.len()
    }

    /// `X̃'X̃`.
    pub fn gram(&self) -> [[f64; 2]; 2] {
        [[self.s11, self.s12], [self.s12, self.s22]]
    }

    fn check_rank(&self) -> Result<f64> {
        let det = self.s11 * self.s22 - self.s12 * self.s12;
        let scale = self.s11 * self.s22;
        let rel = if scale > 0.0 { det / scale } else { 0.0 };
        if !(rel > RANK_TOL) {
            return Err(Error::RankDeficient(rel));
        }
        Ok(det)
    }

    /// LN-type ratio `Σ ỹ²_{t-1} w_t / (σ̂_η (Σ (ỹ²_{t-1})²)^{1/2})`.
    pub fn ln_ratio(&self, w: &[f64], sigma_eta: f64) -> Result<f64> {
        self.check_len(w)?;
        if !(self.s22 > 0.0) {
            return Err(Error::DegenerateSeries("lagged squares are constant".into()));
        }
        if !(sigma_eta > 0.0) {
            return Err(Error::ZeroVariance("sigma_eta is zero".into()));
        }
        let num: f64 = self.x2.iter().zip(w).map(|(x, w)| x * w).sum();
        Ok(num / (sigma_eta * self.s22.sqrt()))
    }

    /// OLS of demeaned `w` on the demeaned lag regressors.
    pub fn fit(&self, w: &[f64]) -> Result<AugmentedFit> {
        self.check_len(w)?;
        let det = self.check_rank()?;
        let tf = w.len() as f64;
        let mw = w.iter().sum::<f64>() / tf;
        let (mut b1, mut b2, mut tss) = (0.0, 0.0, 0.0);
        for ((x1, x2), w) in self.x1.iter().zip(&self.x2).zip(w) {
            let wd = w - mw;
            b1 += x1 * wd;
            b2 += x2 * wd;
            tss += wd * wd;
        }
        let delta_hat = (self.s22 * b1 - self.s12 * b2) / det;
        let omega2_hat = (self.s11 * b2 - self.s12 * b1) / det;
        let rss: f64 = self
            .x1
            .iter()
            .zip(&self.x2)
            .zip(w)
            .map(|((x1, x2), w)| {
                let e = (w - mw) - delta_hat * x1 - omega2_hat * x2;
                e * e
            })
            .sum();
        Ok(AugmentedFit {
            delta_hat,
            omega2_hat,
            sigma_xi2: rss / tf,
            sigma_w2: tss / tf,
            gram: self.gram(),
            xw: [b1, b2],
        })
    }

    fn check_len(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.t() {
            return Err(Error::LengthMismatch { expected: self.t(), found: w.len() });
        }
        Ok(())
    }
}

/// Result of the augmented regression `Z̃₂ = X̃ θ + Ξ̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedFit {
    pub delta_hat: f64,
    pub omega2_hat: f64,
    /// Residual sum of squares over T.
    pub sigma_xi2: f64,
    /// Variance of the regressand.
    pub sigma_w2: f64,
    pub gram: [[f64; 2]; 2],
    /// `X̃'Z̃₂`.
    pub xw: [f64; 2],
}

impl AugmentedFit {
    /// Partialled-out t-ratio on the `y²_{t-1}` coefficient.
    pub fn t_stat(&self) -> Result<f64> {
        let [[s11, s12], [_, s22]] = self.gram;
        let sigma = self.sigma()?;
        let m1x2 = s22 - s12 * s12 / s11;
        if !(m1x2 > 0.0) {
            return Err(Error::RankDeficient(m1x2));
        }
        let m1w = self.xw[1] - s12 * self.xw[0] / s11;
        Ok(m1w / (sigma * m1x2.sqrt()))
    }

    /// `θ̂'(X̃'X̃)θ̂ / σ̂²_ξ`.
    pub fn wald_stat(&self) -> Result<f64> {
        self.sigma()?;
        let q = self.delta_hat * self.xw[0] + self.omega2_hat * self.xw[1];
        Ok(q.max(0.0) / self.sigma_xi2)
    }

    fn sigma(&self) -> Result<f64> {
        // residuals at rounding level count as an exact fit
        if !(self.sigma_xi2 > EXACT_FIT_TOL * self.sigma_w2) {
            return Err(Error::ZeroVariance("augmented regression fits exactly".into()));
        }
        Ok(self.sigma_xi2.sqrt())
    }
}

pub fn augmented_fit(y: &Series, w: &[f64]) -> Result<AugmentedFit> {
    LagDesign::new(y).fit(w)
}

/// One evaluated statistic with the nuisance estimates behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatValue {
    pub kind: StatKind,
    pub value: f64,
    pub sigma_eps2: f64,
    pub sigma_eta2: f64,
    pub psi_hat: Option<f64>,
    pub rho_used: f64,
}

/// Evaluates any statistic at any hypothetical ρ for one fixed series.
#[derive(Debug, Clone)]
pub struct StatContext<'a> {
    y: &'a Series,
    design: LagDesign,
}

impl<'a> StatContext<'a> {
    pub fn new(y: &'a Series) -> Self {
        Self { y, design: LagDesign::new(y) }
    }

    pub fn design(&self) -> &LagDesign {
        &self.design
    }

    pub fn series(&self) -> &Series {
        self.y
    }

    pub fn stat(&self, rho: f64, kind: StatKind) -> Result<StatValue> {
        let z = residuals(self.y, rho);
        let z2 = z.squared();
        self.stat_from_parts(&z.z, &z2, rho, kind)
    }

    /// All six statistics at `rho`, sharing residuals and nuisance estimates.
    pub fn all(&self, rho: f64) -> Result<Vec<StatValue>> {
        let z = residuals(self.y, rho);
        let z2 = z.squared();
        StatKind::ALL.iter().map(|&k| self.stat_from_parts(&z.z, &z2, rho, k)).collect()
    }

    /// Statistic from residuals `z` and a vector standing in for `z²`.
    pub fn stat_from_parts(&self, z: &[f64], z2: &[f64], rho: f64, kind: StatKind) -> Result<StatValue> {
        let nuis = NuisanceEstimates::from_parts(z, z2)?;
        let modified;
        let w: &[f64] = if kind.is_modified() {
            modified = modify_parts(z, z2, &nuis)?;
            &modified
        } else {
            z2
        };
        let value = match kind {
            StatKind::Ln | StatKind::LnStar => self.design.ln_ratio(w, nuis.sigma_eta2.sqrt())?,
            StatKind::AugT | StatKind::AugTStar => self.design.fit(w)?.t_stat()?,
            StatKind::Wald | StatKind::WaldStar => self.design.fit(w)?.wald_stat()?,
        };
        Ok(StatValue {
            kind,
            value,
            sigma_eps2: nuis.sigma_eps2,
            sigma_eta2: nuis.sigma_eta2,
            psi_hat: nuis.psi_hat,
            rho_used: rho,
        })
    }
}

fn kind_of(base: StatKind, modified: bool) -> StatKind {
    if modified {
        base.modified()
    } else {
        base
    }
}

pub fn ln_stat(y: &Series, rho: f64, modified: bool) -> Result<StatValue> {
    StatContext::new(y).stat(rho, kind_of(StatKind::Ln, modified))
}

pub fn aug_t_stat(y: &Series, rho: f64, modified: bool) -> Result<StatValue> {
    StatContext::new(y).stat(rho, kind_of(StatKind::AugT, modified))
}

pub fn wald_stat(y: &Series, rho: f64, modified: bool) -> Result<StatValue> {
    StatContext::new(y).stat(rho, kind_of(StatKind::Wald, modified))
}

pub fn compute_stat(y: &Series, rho: f64, kind: StatKind) -> Result<StatValue> {
    StatContext::new(y).stat(rho, kind)
}
