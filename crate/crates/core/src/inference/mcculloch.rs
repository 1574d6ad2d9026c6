use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stable::StableParams;

/// Smallest sample accepted by [`mcculloch_estimate`].
pub const MIN_SAMPLE: usize = 100;

// β = 0 columns of McCulloch's tables, see data/mcculloch_tables.md.
const NU_ALPHA: [f64; 15] = [
    2.439, 2.5, 2.6, 2.7, 2.8, 3.0, 3.2, 3.5, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 25.0,
];
const ALPHA_OF_NU: [f64; 15] = [
    2.000, 1.916, 1.808, 1.729, 1.664, 1.563, 1.484, 1.391, 1.279, 1.128, 1.029, 0.896, 0.818,
    0.698, 0.593,
];
const ALPHA_GRID: [f64; 16] = [
    0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0,
];
const NU_C: [f64; 16] = [
    2.588, 2.337, 2.189, 2.098, 2.040, 2.000, 1.980, 1.965, 1.955, 1.946, 1.939, 1.933, 1.927,
    1.921, 1.914, 1.908,
];

/// Quantile-based estimate of a symmetric stable law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McCulloch {
    pub alpha: f64,
    pub sigma: f64,
    /// `(x_.95 - x_.05) / (x_.75 - x_.25)`.
    pub nu_alpha: f64,
    /// Sample quantiles at 5, 25, 50, 75 and 95 percent.
    pub quantiles: [f64; 5],
    pub n: usize,
}

impl McCulloch {
    /// The estimate as stable parameters. Fails when `α̂` reached 2, which
    /// lies outside the heavy-tailed model.
    pub fn params(&self) -> Result<StableParams> {
        if self.alpha >= 2.0 {
            return Err(Error::invalid(format!(
                "estimated alpha is 2 (nu_alpha = {:.4}), the sample looks Gaussian",
                self.nu_alpha
            )));
        }
        StableParams::new(self.alpha, self.sigma)
    }
}

/// Type-7 (linear interpolation) quantile of a sorted, non-empty sample.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}

/// `α` as a function of the quantile ratio `ν_α`, `β = 0`. Ratios below the
/// Gaussian value give 2; ratios above the table give its last entry.
pub fn alpha_from_nu(nu_alpha: f64) -> f64 {
    interp(&NU_ALPHA, &ALPHA_OF_NU, nu_alpha)
}

/// `ν_c(α) = IQR / σ` for `β = 0`.
pub fn nu_c(alpha: f64) -> f64 {
    interp(&ALPHA_GRID, &NU_C, alpha)
}

/// McCulloch's quantile estimator of `(α, σ)` with `β = 0` imposed.
pub fn mcculloch_estimate(data: &[f64]) -> Result<McCulloch> {
    if data.len() < MIN_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "{} observations, the quantile estimator needs at least {MIN_SAMPLE}",
            data.len()
        )));
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("observation {i} is not finite")));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = [0.05, 0.25, 0.5, 0.75, 0.95].map(|p| quantile_type7(&sorted, p));
    let iqr = q[3] - q[1];
    if !(iqr > 0.0) {
        return Err(Error::InsufficientData(
            "interquartile range is zero, scale cannot be estimated".into(),
        ));
    }
    let nu_alpha = (q[4] - q[0]) / iqr;
    let alpha = alpha_from_nu(nu_alpha);
    Ok(McCulloch {
        alpha,
        sigma: iqr / nu_c(alpha),
        nu_alpha,
        quantiles: q,
        n: data.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_matches_hand_values() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_type7(&x, 0.25), 2.0);
        assert_eq!(quantile_type7(&x, 0.1), 1.4);
        assert_eq!(quantile_type7(&x, 1.0), 5.0);
    }

    #[test]
    fn table_end_points() {
        assert_eq!(alpha_from_nu(2.0), 2.0);
        assert_eq!(alpha_from_nu(100.0), 0.593);
        assert!((alpha_from_nu(3.0) - 1.563).abs() < 1e-12);
        assert!((nu_c(1.0) - 2.0).abs() < 1e-12);
        assert!((nu_c(1.55) - 0.5 * (1.939 + 1.933)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_sample_is_rejected_as_stable() {
        // exact normal quantiles, nu_alpha = 2.439
        let m = McCulloch {
            alpha: 2.0,
            sigma: 1.0,
            nu_alpha: 2.439,
            quantiles: [0.0; 5],
            n: 100,
        };
        assert!(m.params().is_err());
    }

    #[test]
    fn short_or_constant_samples_fail() {
        assert!(matches!(mcculloch_estimate(&[1.0; 99]), Err(Error::InsufficientData(_))));
        assert!(matches!(mcculloch_estimate(&[1.0; 100]), Err(Error::InsufficientData(_))));
        let mut x = vec![0.0; 150];
        x[3] = f64::NAN;
        assert!(mcculloch_estimate(&x).is_err());
    }
}
