use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::power_series_sum;
use crate::quad::{self, QuadConfig};

use super::mcculloch::mcculloch_estimate;

/// Power applied to the scale estimates in `τ̂(t) = 2σ̂^p - σ̂_t^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodifferencePower {
    /// `p = 1`, the raw scale estimates.
    #[default]
    Unit,
    /// `p = α̂`; a plug-in for `2‖m‖^α - ‖m - m(· + t)‖^α`.
    Alpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Theoretical,
    Empirical,
}

/// Codifference values at lags `1..=L`. Empirical entries are `None` when
/// the scale of a differenced series could not be estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodifferenceSeries {
    pub lags: Vec<usize>,
    pub values: Vec<Option<f64>>,
    pub kind: SeriesKind,
    pub provenance: String,
}

impl CodifferenceSeries {
    /// `(lag, value)` for the lags that carry a value.
    pub fn present(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.lags
            .iter()
            .zip(&self.values)
            .filter_map(|(&l, v)| v.map(|v| (l, v)))
    }
}

/// Explicit terms in the difference sums before the integral tail.
const EXPLICIT: usize = 256;

fn check(delta: f64, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if delta * alpha <= 1.0 {
        return Err(Error::Divergent(format!(
            "coefficients (1 + k^delta)^-1 are not alpha-summable for delta * alpha = {} <= 1",
            delta * alpha
        )));
    }
    Ok(())
}

/// `Σ_{k≥1} ((1 + k^δ)^{-1} - (1 + (k+t)^δ)^{-1})^α`.
fn difference_sum(delta: f64, alpha: f64, t: usize, a: &[f64]) -> f64 {
    let mut head = 0.0;
    for k in 1..=EXPLICIT {
        head += (a[k] - a[k + t]).powf(alpha);
    }
    let tf = t as f64;
    // (a(x) - a(x + t)) x^{δ+1}, computed without cancellation
    let profile = |x: f64| {
        if x.is_infinite() {
            return (delta * tf).powf(alpha);
        }
        let u = tf / x;
        let growth = (delta * u.ln_1p()).exp_m1() / u;
        let xd = x.powf(-delta);
        (tf * growth / ((xd + 1.0) * (xd + (1.0 + u).powf(delta)))).powf(alpha)
    };
    let f = |x: f64| (1.0 / (1.0 + x.powf(delta)) - 1.0 / (1.0 + (x + tf).powf(delta))).powf(alpha);
    let x0 = EXPLICIT as f64 + 0.5;
    let tail = quad::integrate_power_tail(profile, x0, (delta + 1.0) * alpha, &QuadConfig::with_tol(0.0, 1e-6))
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    let h = 1e-3 * x0;
    let slope = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
    head + tail + slope / 24.0
}

/// `τ(t) / c^α` for each lag, from a single table of coefficients.
pub(crate) fn shape(delta: f64, alpha: f64, lags: &[usize]) -> Result<Vec<f64>> {
    check(delta, alpha)?;
    let max = lags.iter().copied().max().unwrap_or(0);
    let a: Vec<f64> = (0..=EXPLICIT + max)
        .map(|k| 1.0 / (1.0 + (k as f64).powf(delta)))
        .collect();
    let s1 = power_series_sum(delta, alpha, 1);
    // S_{t+1} = S_1 - Σ_{k≤t} a_k^α unless that cancels badly
    let mut head = vec![0.0; max.min(EXPLICIT) + 1];
    for k in 1..head.len() {
        head[k] = head[k - 1] + a[k].powf(alpha);
    }
    let tail_from = |t: usize| {
        if t < head.len() && head[t] < (1.0 - 1e-4) * s1 {
            s1 - head[t]
        } else {
            power_series_sum(delta, alpha, t as i64 + 1)
        }
    };
    Ok(lags
        .iter()
        .map(|&t| {
            if t == 0 {
                2.0 * s1
            } else {
                s1 + tail_from(t) - difference_sum(delta, alpha, t, &a)
            }
        })
        .collect())
}

/// Codifference `τ(t) = 2‖m‖^α - ‖m - m(· + t)‖^α` of the causal series
/// `a_k = c (1 + k^δ)^{-1}` at integer lag `t ≥ 0`.
pub fn codifference_at(c: f64, delta: f64, alpha: f64, t: usize) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("c must be positive, got {c}")));
    }
    Ok(c.powf(alpha) * shape(delta, alpha, &[t])?[0])
}

/// Model codifference at lags `1..=max_lag`.
pub fn theoretical_codifference(c: f64, delta: f64, alpha: f64, max_lag: usize) -> Result<CodifferenceSeries> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("c must be positive, got {c}")));
    }
    let lags: Vec<usize> = (1..=max_lag).collect();
    let ca = c.powf(alpha);
    let values = shape(delta, alpha, &lags)?
        .into_iter()
        .map(|g| Some(ca * g))
        .collect();
    Ok(CodifferenceSeries {
        lags,
        values,
        kind: SeriesKind::Theoretical,
        provenance: format!("causal series c = {c}, delta = {delta}, alpha = {alpha}"),
    })
}

/// `τ̂(t) = 2σ̂^p - σ̂_t^p` for `t = 1..=max_lag`, where `σ̂` is the McCulloch
/// scale of `data` and `σ̂_t` that of `X(i) - X(i + t)`.
pub fn empirical_codifference(data: &[f64], max_lag: usize, power: CodifferencePower) -> Result<CodifferenceSeries> {
    if max_lag == 0 {
        return Err(Error::invalid("max_lag must be at least 1"));
    }
    if 4 * max_lag >= data.len() {
        return Err(Error::InsufficientData(format!(
            "{} observations cannot support {max_lag} lags (need more than 4 per lag)",
            data.len()
        )));
    }
    let full = mcculloch_estimate(data)?;
    let p = match power {
        CodifferencePower::Unit => 1.0,
        CodifferencePower::Alpha => full.alpha,
    };
    let base = 2.0 * full.sigma.powf(p);
    let lags: Vec<usize> = (1..=max_lag).collect();
    let values = lags
        .iter()
        .map(|&t| {
            let diffs: Vec<f64> = data.windows(t + 1).map(|w| w[0] - w[t]).collect();
            mcculloch_estimate(&diffs).ok().map(|m| base - m.sigma.powf(p))
        })
        .collect();
    Ok(CodifferenceSeries {
        lags,
        values,
        kind: SeriesKind::Empirical,
        provenance: format!(
            "McCulloch scales, n = {}, alpha_hat = {:.4}, sigma_hat = {:.6e}, power = {:?}",
            data.len(),
            full.alpha,
            full.sigma,
            power
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_zero_is_twice_the_norm() {
        let (c, d, a) = (0.3, 1.2, 1.4);
        let n = crate::Kernel::causal_series(c, d).unwrap().alpha_norm(a).value;
        let t0 = codifference_at(c, d, a, 0).unwrap();
        assert!((t0 - 2.0 * n).abs() <= 1e-12 * n);
    }

    #[test]
    fn decreasing_in_lag() {
        let s = theoretical_codifference(0.0019, 1.0474, 1.56, 25).unwrap();
        let v: Vec<f64> = s.values.iter().map(|v| v.unwrap()).collect();
        assert!(v.iter().all(|&x| x > 0.0));
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_non_summable() {
        assert!(matches!(codifference_at(1.0, 0.6, 1.5, 1), Err(Error::Divergent(_))));
    }

    #[test]
    fn lag_budget() {
        let x = vec![1.0; 80];
        assert!(matches!(
            empirical_codifference(&x, 20, CodifferencePower::Unit),
            Err(Error::InsufficientData(_))
        ));
    }
}
