use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::rng;
use crate::stable::{LinearConfig, LinearSimulator, StableParams};

use super::codifference::{empirical_codifference, theoretical_codifference};
use super::fit::{fit_codifference, FitOptions};
use super::mcculloch::{mcculloch_estimate, quantile_type7};

/// Quantile levels reported per lag.
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_rep: usize,
    /// Length of each simulated series.
    pub n: usize,
    pub seed: u64,
    pub fit: FitOptions,
    pub linear: LinearConfig,
}

impl BootstrapConfig {
    pub fn new(n: usize, n_rep: usize, seed: u64) -> Self {
        Self {
            n_rep,
            n,
            seed,
            fit: FitOptions::default(),
            linear: LinearConfig::default(),
        }
    }
}

/// Bootstrap distribution of `τ̂` at one lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagQuantiles {
    pub lag: usize,
    /// At [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 5],
    pub theoretical: f64,
    pub missing: usize,
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub alpha_hat: Option<f64>,
    pub delta_hat: Option<f64>,
    pub c_hat: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub alpha: f64,
    pub delta: f64,
    pub c: f64,
    pub config: BootstrapConfig,
    pub lags: Vec<LagQuantiles>,
    pub std_delta: f64,
    pub std_c: f64,
    pub mean_delta: f64,
    pub mean_c: f64,
    pub failures: usize,
    pub replicates: Vec<Replicate>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Simulates `n_rep` series from the causal series model `(α, δ, c)` with
/// unit-scale innovations, re-estimates `τ̂` and refits `(δ, c)` on each.
///
/// Replicate `r` draws from stream `1 + r` of `seed`, so the report does not
/// depend on the number of threads. Each refit uses the replicate's own
/// McCulloch `α̂`.
pub fn parametric_bootstrap(alpha: f64, delta: f64, c: f64, cfg: &BootstrapConfig) -> Result<BootstrapReport> {
    if cfg.n_rep < 2 {
        return Err(Error::invalid("bootstrap needs at least 2 replicates"));
    }
    let max_lag = cfg.fit.max_lag;
    let theory = theoretical_codifference(c, delta, alpha, max_lag)?;
    let kernel = Kernel::causal_series(c, delta)?;
    let sim = LinearSimulator::new(&kernel, StableParams::new(alpha, 1.0)?, cfg.n, &cfg.linear)?;
    // the series length must carry every lag
    if 4 * max_lag >= cfg.n {
        return Err(Error::InsufficientData(format!(
            "series length {} cannot support {max_lag} lags",
            cfg.n
        )));
    }

    let runs: Vec<(Vec<Option<f64>>, Replicate)> = (0..cfg.n_rep)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(cfg.seed, 1 + r as u64);
            let x = sim.simulate(&mut rng);
            let tau = match empirical_codifference(&x, max_lag, cfg.fit.power) {
                Ok(t) => t,
                Err(e) => {
                    return (
                        vec![None; max_lag],
                        Replicate {
                            alpha_hat: None,
                            delta_hat: None,
                            c_hat: None,
                            error: Some(e.to_string()),
                        },
                    )
                }
            };
            let fitted = mcculloch_estimate(&x)
                .and_then(|m| m.params())
                .and_then(|p| {
                    if tau.values.iter().any(|v| v.is_none()) {
                        return Err(Error::InsufficientData("missing codifference lag".into()));
                    }
                    fit_codifference(&tau, p.alpha, &cfg.fit)
                });
            let rep = match fitted {
                Ok(f) => Replicate {
                    alpha_hat: Some(f.alpha),
                    delta_hat: Some(f.delta_hat),
                    c_hat: Some(f.c_hat),
                    error: None,
                },
                Err(e) => Replicate {
                    alpha_hat: None,
                    delta_hat: None,
                    c_hat: None,
                    error: Some(e.to_string()),
                },
            };
            (tau.values, rep)
        })
        .collect();

    let failures = runs.iter().filter(|(_, r)| r.error.is_some()).count();
    if failures as f64 > MAX_FAILURE_RATE * cfg.n_rep as f64 {
        let first = runs
            .iter()
            .find_map(|(_, r)| r.error.clone())
            .unwrap_or_default();
        return Err(Error::NonConvergence {
            estimate: failures as f64 / cfg.n_rep as f64,
            error: MAX_FAILURE_RATE,
            context: format!("{failures} of {} bootstrap refits failed, first: {first}", cfg.n_rep),
        });
    }

    let lags = (0..max_lag)
        .map(|i| {
            let mut v: Vec<f64> = runs.iter().filter_map(|(t, _)| t[i]).collect();
            v.sort_by(f64::total_cmp);
            let quantiles = if v.is_empty() {
                [f64::NAN; 5]
            } else {
                QUANTILE_LEVELS.map(|p| quantile_type7(&v, p))
            };
            LagQuantiles {
                lag: i + 1,
                quantiles,
                theoretical: theory.values[i].unwrap_or(f64::NAN),
                missing: cfg.n_rep - v.len(),
            }
        })
        .collect();

    let deltas: Vec<f64> = runs.iter().filter_map(|(_, r)| r.delta_hat).collect();
    let cs: Vec<f64> = runs.iter().filter_map(|(_, r)| r.c_hat).collect();
    if deltas.len() < 2 {
        return Err(Error::InsufficientData("fewer than 2 successful refits".into()));
    }
    let (mean_delta, std_delta) = mean_std(&deltas);
    let (mean_c, std_c) = mean_std(&cs);
    Ok(BootstrapReport {
        alpha,
        delta,
        c,
        config: cfg.clone(),
        lags,
        std_delta,
        std_c,
        mean_delta,
        mean_c,
        failures,
        replicates: runs.into_iter().map(|(_, r)| r).collect(),
    })
}
