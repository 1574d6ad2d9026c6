//! Stable-parameter estimation, codifference contrast fitting and the
//! parametric bootstrap for the causal series kernel `c (1 + k^δ)^{-1}`.

mod bootstrap;
mod codifference;
mod fit;
mod mcculloch;

pub use bootstrap::{
    parametric_bootstrap, BootstrapConfig, BootstrapReport, LagQuantiles, Replicate, MAX_FAILURE_RATE,
    QUANTILE_LEVELS,
};
pub use codifference::{
    codifference_at, empirical_codifference, theoretical_codifference, CodifferencePower, CodifferenceSeries,
    SeriesKind,
};
pub use fit::{fit_codifference, fit_minimal_contrast, FitOptions, FitResult};
pub use mcculloch::{alpha_from_nu, mcculloch_estimate, nu_c, quantile_type7, McCulloch, MIN_SAMPLE};
