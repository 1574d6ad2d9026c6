use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::codifference::{empirical_codifference, shape, CodifferencePower, CodifferenceSeries};
use super::mcculloch::mcculloch_estimate;

/// Settings of the L² minimal-contrast fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_lag: usize,
    pub power: CodifferencePower,
    /// Points of the logarithmic δ grid.
    pub delta_grid: usize,
    /// δ is searched in `(1/α + delta_margin, delta_max]`.
    pub delta_margin: f64,
    pub delta_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Stop when one refinement step improves the objective by less.
    pub objective_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_lag: 25,
            power: CodifferencePower::Unit,
            delta_grid: 48,
            delta_margin: 0.01,
            delta_max: 3.0,
            c_min: 1e-5,
            c_max: 1.0,
            objective_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: f64,
    pub delta_hat: f64,
    pub c_hat: f64,
    pub objective: f64,
    pub n_lags: usize,
    /// Smallest objective over the coarse grid.
    pub grid_objective: f64,
    /// δ̂ sits on the lower end of the search interval, where the model is
    /// close to ill-posed.
    pub delta_at_lower_bound: bool,
    pub c_at_bound: bool,
    pub bootstrap_std: Option<(f64, f64)>,
    pub power: CodifferencePower,
    /// McCulloch scale of the data, when fitted from data.
    pub sigma_hat: Option<f64>,
    pub tau_hat: CodifferenceSeries,
}

struct Profile<'a> {
    alpha: f64,
    lags: Vec<usize>,
    targets: Vec<f64>,
    opts: &'a FitOptions,
}

impl Profile<'_> {
    /// Objective minimised over `c` for fixed δ: `c^α = Σ g τ̂ / Σ g²`, clamped.
    fn eval(&self, delta: f64) -> Result<(f64, f64, bool)> {
        let g = shape(delta, self.alpha, &self.lags)?;
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let gt: f64 = g.iter().zip(&self.targets).map(|(a, b)| a * b).sum();
        let lo = self.opts.c_min.powf(self.alpha);
        let hi = self.opts.c_max.powf(self.alpha);
        let raw = gt / gg;
        let ca = raw.clamp(lo, hi);
        let obj = g
            .iter()
            .zip(&self.targets)
            .map(|(a, b)| (ca * a - b).powi(2))
            .sum();
        Ok((obj, ca.powf(1.0 / self.alpha), raw != ca))
    }
}

/// Brent's derivative-free minimiser on `[a, b]`.
fn brent<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, xtol: f64, ftol: f64) -> Result<(f64, f64)> {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol = xtol * x.abs() + 1e-15;
        if (x - m).abs() <= 2.0 * tol - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < 2.0 * tol || b - u < 2.0 * tol {
                    d = if x < m { tol } else { -tol };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol { x + d } else { x + tol.copysign(d) };
        let fu = f(u)?;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
            if (last - fx).abs() < ftol && last.is_finite() && e.abs() <= tol {
                break;
            }
            last = fx;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

/// Fits `(δ, c)` of the causal series `c (1 + k^δ)^{-1}` to a codifference
/// series by least squares over the lags that carry a value.
///
/// For each δ the optimal `c^α` is linear least squares and is profiled out;
/// δ is located on a logarithmic grid and refined with Brent's method.
pub fn fit_codifference(tau_hat: &CodifferenceSeries, alpha: f64, opts: &FitOptions) -> Result<FitResult> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 2) for a stable fit, got {alpha}"
        )));
    }
    if opts.delta_grid < 3 || !(opts.c_min > 0.0 && opts.c_min < opts.c_max) {
        return Err(Error::invalid("fit grid needs >= 3 points and 0 < c_min < c_max"));
    }
    let (lags, targets): (Vec<usize>, Vec<f64>) = tau_hat.present().filter(|&(l, _)| l <= opts.max_lag).unzip();
    if lags.is_empty() {
        return Err(Error::InsufficientData("no codifference values to fit".into()));
    }
    let lo = 1.0 / alpha + opts.delta_margin;
    let hi = opts.delta_max;
    if !(lo < hi) {
        return Err(Error::invalid(format!(
            "empty delta range ({lo}, {hi}] for alpha = {alpha}"
        )));
    }
    let profile = Profile {
        alpha,
        lags,
        targets,
        opts,
    };
    let n = opts.delta_grid;
    let grid: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let mut values = Vec::with_capacity(n);
    for &d in &grid {
        values.push(profile.eval(d)?.0);
    }
    let best = (0..n)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .unwrap_or(0);
    let grid_objective = values[best];
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(n - 1)];
    let (mut delta, mut objective) = brent(|d| profile.eval(d).map(|r| r.0), a, b, 1e-10, opts.objective_tol)?;
    if grid_objective < objective {
        delta = grid[best];
        objective = grid_objective;
    }
    let (_, c_hat, c_at_bound) = profile.eval(delta)?;
    Ok(FitResult {
        alpha,
        delta_hat: delta,
        c_hat,
        objective,
        n_lags: profile.lags.len(),
        grid_objective,
        delta_at_lower_bound: delta <= lo * (1.0 + 1e-6),
        c_at_bound,
        bootstrap_std: None,
        power: opts.power,
        sigma_hat: None,
        tau_hat: tau_hat.clone(),
    })
}

/// McCulloch estimate, empirical codifference and contrast fit of `data`.
/// `alpha_hat` overrides the McCulloch index when given.
pub fn fit_minimal_contrast(data: &[f64], alpha_hat: Option<f64>, opts: &FitOptions) -> Result<FitResult> {
    let est = mcculloch_estimate(data)?;
    let alpha = match alpha_hat {
        Some(a) => a,
        None => est.params()?.alpha,
    };
    let tau_hat = empirical_codifference(data, opts.max_lag, opts.power)?;
    if let Some(missing) = tau_hat.values.iter().position(|v| v.is_none()) {
        return Err(Error::InsufficientData(format!(
            "codifference at lag {} could not be estimated",
            missing + 1
        )));
    }
    let mut fit = fit_codifference(&tau_hat, alpha, opts)?;
    fit.sigma_hat = Some(est.sigma);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::theoretical_codifference;

    #[test]
    fn brent_finds_parabola_minimum() {
        let (x, fx) = brent(|x| Ok((x - 0.3).powi(2) + 1.0), -2.0, 5.0, 1e-12, 0.0).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-14);
    }

    #[test]
    fn noiseless_recovery() {
        let opts = FitOptions::default();
        for (c, d, a) in [(0.0019, 1.0474, 1.56), (0.3, 1.8, 1.2), (0.05, 2.5, 0.9)] {
            let tau = theoretical_codifference(c, d, a, 25).unwrap();
            let fit = fit_codifference(&tau, a, &opts).unwrap();
            assert!((fit.delta_hat - d).abs() < 1e-6, "{} vs {d}", fit.delta_hat);
            assert!((fit.c_hat / c - 1.0).abs() < 1e-6, "{} vs {c}", fit.c_hat);
            assert!(fit.objective <= fit.grid_objective);
            assert!(!fit.delta_at_lower_bound);
        }
    }

    #[test]
    fn flags_lower_bound() {
        // a flat target is best matched by the slowest admissible decay
        let tau = CodifferenceSeries {
            lags: (1..=25).collect(),
            values: vec![Some(1e-3); 25],
            kind: super::super::SeriesKind::Empirical,
            provenance: String::new(),
        };
        let fit = fit_codifference(&tau, 1.5, &FitOptions::default()).unwrap();
        assert!(fit.delta_at_lower_bound);
    }
}
