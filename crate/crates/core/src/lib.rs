//! Tests for coefficient randomness in local-to-unity random coefficient
//! autoregressions.
//!
//! The model is `y_t = (ρ + ω v_t) y_{t-1} + ε_t`. The crate simulates it,
//! computes the LN, augmented t and Wald statistics (and their versions
//! modified for correlation between ε and ε²), simulates their limiting
//! distributions, and runs the Bonferroni-Wald test that stays valid when ρ
//! is unknown.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bonferroni;
pub mod empirical;
pub mod error;
pub mod experiments;
pub mod estimate;
pub mod limitdist;
pub mod rng;
pub mod simulate;
pub mod teststats;

#[cfg(test)]
mod proptests;

pub use error::{Error, Result};
pub use estimate::{nuisance_estimates, residuals, rho_ols, t_rho, NuisanceEstimates, Residuals, RhoEstimate};
pub use limitdist::{
    asymptotic_power_curve, build_cv_table, draw_functionals, limit_stat, CriticalValueTable, FunctionalDraw,
    LimitParams, PathConfig,
};
pub use simulate::{
    gen_innovations, simulate_rca, CorrSpec, InnovationKind, InnovationSpec, Innovations, RcaParams, Series,
};
pub use teststats::{compute_stat, StatContext, StatKind, StatValue};
pub use bonferroni::{
    bonferroni_test, calibrate_alpha1, confidence_set, AbarGrid, Alpha1Table, CalibrationConfig, ConfidenceSet,
    Decision, TestReport,
};
pub use empirical::{ingest, run_empirical, Column, Detrend, EmpiricalConfig, EmpiricalReport};
pub use experiments::{
    run_asymp_power, run_power, run_size, AsympPowerConfig, PowerConfig, ResultRow, ResultTable, SizeConfig,
    Tables, TestKind,
};
