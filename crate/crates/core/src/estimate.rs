//! Residuals, variance and ψ estimators, and the OLS autoregressive
//! coefficient with its centered t-ratio.
//!
//! All sums run over t = 1..T with lags y_0..y_{T-1}, and every average
//! divides by T.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::Series;
use crate::teststats::EXACT_FIT_TOL;

/// Largest |ψ̂| allowed after clamping rounding overshoot.
pub const PSI_CLAMP: f64 = 1.0 - 1e-12;

/// `z_t(ρ) = y_t − ρ y_{t-1}`, t = 1..T.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub z: Vec<f64>,
    pub rho_used: f64,
}

impl Residuals {
    pub fn squared(&self) -> Vec<f64> {
        self.z.iter().map(|z| z * z).collect()
    }
}

pub fn residuals(y: &Series, rho: f64) -> Residuals {
    let z = y.current().iter().zip(y.lagged()).map(|(yt, yl)| yt - rho * yl).collect();
    Residuals { z, rho_used: rho }
}

/// σ̂²_ε, σ̂²_η and ψ̂ computed from one residual vector.
///
/// `psi_hat` is `None` when either variance is zero; use [`Self::psi`] to
/// get it as a `Result`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuisanceEstimates {
    pub sigma_eps2: f64,
    pub sigma_eta2: f64,
    pub psi_hat: Option<f64>,
    #[serde(default)]
    pub psi_clamped: bool,
}

impl NuisanceEstimates {
    pub fn psi(&self) -> Result<f64> {
        self.psi_hat.ok_or(Error::UndefinedPsi {
            sigma_eps2: self.sigma_eps2,
            sigma_eta2: self.sigma_eta2,
        })
    }

    /// Estimates from residuals `z` and a vector standing in for `z²`.
    /// The two differ only under the η-replacement used for calibration.
    pub(crate) fn from_parts(z: &[f64], z2: &[f64]) -> Result<Self> {
        let n = z.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("nuisance estimates need T >= 2, got {n}")));
        }
        if z2.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: z2.len() });
        }
        let tf = n as f64;
        let sigma_eps2 = z2.iter().sum::<f64>() / tf;
        let mut eta2 = 0.0;
        let mut cross = 0.0;
        for (&zt, &z2t) in z.iter().zip(z2) {
            let d = z2t - sigma_eps2;
            eta2 += d * d;
            cross += zt * d;
        }
        let sigma_eta2 = eta2 / tf;
        let (psi_hat, psi_clamped) = if sigma_eps2 > 0.0 && sigma_eta2 > 0.0 {
            let raw = (cross / tf) / (sigma_eps2.sqrt() * sigma_eta2.sqrt());
            if raw.abs() > PSI_CLAMP {
                log::debug!("psi estimate {raw} outside (-1, 1); clamped");
                (Some(PSI_CLAMP.copysign(raw)), true)
            } else {
                (Some(raw), false)
            }
        } else {
            (None, false)
        };
        Ok(Self { sigma_eps2, sigma_eta2, psi_hat, psi_clamped })
    }
}

pub fn nuisance_estimates(z: &Residuals) -> Result<NuisanceEstimates> {
    NuisanceEstimates::from_parts(&z.z, &z.squared())
}

/// OLS estimate ρ̂ with what is needed to evaluate `t_{ρ̄}` for any ρ̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub rho_hat: f64,
    /// Σ y²_{t-1}.
    pub sum_lag_sq: f64,
    /// σ̂²_ε(ρ̂).
    pub sigma_eps2: f64,
}

impl RhoEstimate {
    /// `t_{ρ̄} = (ρ̂ − ρ̄) (Σ y²_{t-1} / σ̂²_ε(ρ̂))^{1/2}`.
    pub fn t_ratio(&self, rho_bar: f64) -> Result<f64> {
        Ok((self.rho_hat - rho_bar) * self.precision()?)
    }

    /// `(Σ y²_{t-1} / σ̂²_ε(ρ̂))^{1/2}`, the slope of `t_{ρ̄}` in −ρ̄.
    pub fn precision(&self) -> Result<f64> {
        if !(self.sigma_eps2 > 0.0) {
            return Err(Error::ZeroVariance("residual variance at the OLS estimate is zero".into()));
        }
        Ok((self.sum_lag_sq / self.sigma_eps2).sqrt())
    }

    /// `T (ρ̂ − 1)`, the local-to-unity estimate of a.
    pub fn local_drift(&self, t: usize) -> f64 {
        t as f64 * (self.rho_hat - 1.0)
    }
}

pub fn rho_ols(y: &Series) -> Result<RhoEstimate> {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&yt, &yl) in y.current().iter().zip(y.lagged()) {
        sxy += yl * yt;
        sxx += yl * yl;
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateSeries("all lagged values are zero".into()));
    }
    let rho_hat = sxy / sxx;
    let tf = y.t() as f64;
    let mut sigma_eps2 = residuals(y, rho_hat).z.iter().map(|z| z * z).sum::<f64>() / tf;
    let scale = y.current().iter().map(|v| v * v).sum::<f64>() / tf;
    if sigma_eps2 <= EXACT_FIT_TOL * scale {
        // rounding-level residuals from an exact autoregression
        sigma_eps2 = 0.0;
    }
    Ok(RhoEstimate { rho_hat, sum_lag_sq: sxx, sigma_eps2 })
}

pub fn t_rho(y: &Series, rho_bar: f64) -> Result<f64> {
    rho_ols(y)?.t_ratio(rho_bar)
}
