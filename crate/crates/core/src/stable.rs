//! Symmetric α-stable draws, linear SαS time series and the
//! characteristic functions of stable moving averages.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{power_series_sum, Kernel};
use crate::quad::{self, QuadConfig};
use crate::rng::{self, Rng};

/// Stability index and scale of a symmetric α-stable law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub sigma: f64,
}

impl StableParams {
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { alpha, sigma })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 2), got {alpha}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub values: Vec<f64>,
    pub time_step: f64,
    pub seed: u64,
}

/// Uniform on the open interval (0, 1).
#[inline]
fn open_unit(rng: &mut Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// One standard (σ = 1) SαS draw by the Chambers–Mallows–Stuck method.
#[inline]
pub fn standard_sas(rng: &mut Rng, alpha: f64) -> f64 {
    let v = PI * (open_unit(rng) - 0.5);
    let w = -open_unit(rng).ln();
    if alpha == 1.0 {
        return v.tan();
    }
    let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// `n` i.i.d. SαS(α, σ) draws from stream 0 of `seed`.
pub fn sample_sas(params: StableParams, n: usize, seed: u64) -> Result<SamplePath> {
    let params = StableParams::new(params.alpha, params.sigma)?;
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let mut r = rng::stream(seed, 0);
    let values = (0..n)
        .map(|_| params.sigma * standard_sas(&mut r, params.alpha))
        .collect();
    Ok(SamplePath {
        values,
        time_step: 1.0,
        seed,
    })
}

/// `P(|X| > x) x^α → tail_constant(α)` for standard SαS.
pub fn tail_constant(alpha: f64) -> f64 {
    2.0 * libm::tgamma(alpha) * (PI * alpha / 2.0).sin() / PI
}

/// `E exp(i s X(0)) = exp(-|s|^α ‖m‖_α^α)`.
pub fn char_univariate(s: f64, kernel: &Kernel, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let norm = kernel.alpha_norm(alpha);
    if !norm.is_finite() {
        return Err(Error::Divergent(norm.divergence.unwrap_or_default()));
    }
    Ok((-s.abs().powf(alpha) * norm.value).exp())
}

/// `E exp(i (s1 X(0) + s2 X(t)))` with relative quadrature error `rel_tol`
/// on the exponent.
pub fn char_bivariate(
    s1: f64,
    s2: f64,
    t: f64,
    kernel: &Kernel,
    alpha: f64,
    rel_tol: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    let cfg = QuadConfig::with_tol(0.0, rel_tol);
    Ok((-kernel.char_exponent(s1, s2, t, alpha, &cfg)?.value).exp())
}

/// Knobs for [`LinearSimulator`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    /// Coefficients convolved exactly; `None` uses `max(16 n, 4096)`.
    pub direct_window: Option<usize>,
    /// Relative width of the aggregated tail blocks.
    pub block_ratio: f64,
    /// Lags beyond `far_factor · n` are merged into one draw shared by the
    /// whole path.
    pub far_factor: f64,
    /// Largest finite coefficient list accepted.
    pub max_window: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            direct_window: None,
            block_ratio: 0.05,
            far_factor: 1000.0,
            max_window: 1 << 24,
        }
    }
}

/// Bookkeeping for the truncated / aggregated coefficient tail, as
/// fractions of `Σ_j a_j^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub direct_window: usize,
    pub tail_blocks: usize,
    /// α-mass of coefficients not represented at all.
    pub discarded_fraction: f64,
    /// α-mass represented in aggregated form (blocks and shared far draw).
    pub aggregated_fraction: f64,
    /// α-mass of the difference between exact and aggregated coefficients.
    pub approximation_fraction: f64,
}

#[derive(Debug, Clone)]
struct Block {
    lo: i64,
    hi: i64,
    coef: f64,
}

/// Simulates `Y(t) = Σ_j a_j Z(t - j)`, `t = 1..n`, with i.i.d. SαS(α, σ)
/// innovations `Z`.
///
/// Lags up to the direct window are convolved exactly. For infinite causal
/// series, lags beyond it are grouped into geometric blocks carrying one
/// mass-preserving coefficient each; a block's window sum over innovations
/// is assembled from explicit draws near its ends and a single aggregated
/// draw for the run shared by every `t`. Lags beyond `far_factor · n`
/// contribute one draw common to all `t`.
#[derive(Debug, Clone)]
pub struct LinearSimulator {
    alpha: f64,
    sigma: f64,
    n: usize,
    first: i64,
    coeffs: Vec<f64>,
    blocks: Vec<Block>,
    far_scale: f64,
    report: TailReport,
}

impl LinearSimulator {
    pub fn new(kernel: &Kernel, params: StableParams, n: usize, cfg: &LinearConfig) -> Result<Self> {
        let params = StableParams::new(params.alpha, params.sigma)?;
        let alpha = params.alpha;
        if n == 0 {
            return Err(Error::invalid("series length must be at least 1"));
        }
        match kernel {
            Kernel::StepCoefficients {
                coeffs,
                first_index,
                ..
            } => {
                if coeffs.len() > cfg.max_window {
                    return Err(Error::invalid(format!(
                        "{} coefficients exceed the configured window of {}",
                        coeffs.len(),
                        cfg.max_window
                    )));
                }
                Ok(Self {
                    alpha,
                    sigma: params.sigma,
                    n,
                    first: *first_index,
                    coeffs: coeffs.clone(),
                    blocks: Vec::new(),
                    far_scale: 0.0,
                    report: TailReport {
                        direct_window: coeffs.len(),
                        tail_blocks: 0,
                        discarded_fraction: 0.0,
                        aggregated_fraction: 0.0,
                        approximation_fraction: 0.0,
                    },
                })
            }
            Kernel::CausalSeries { c, delta } => {
                Self::for_series(*c, *delta, params, n, cfg)
            }
            _ => Err(Error::invalid(
                "linear simulation needs a causal series or step-coefficient kernel",
            )),
        }
    }

    fn for_series(c: f64, delta: f64, params: StableParams, n: usize, cfg: &LinearConfig) -> Result<Self> {
        let alpha = params.alpha;
        if delta * alpha <= 1.0 {
            return Err(Error::invalid(format!(
                "coefficients c/(1+k^delta) are not alpha-summable: delta * alpha = {} <= 1",
                delta * alpha
            )));
        }
        let direct = cfg.direct_window.unwrap_or((16 * n).max(4096));
        if direct > cfg.max_window {
            return Err(Error::invalid(format!(
                "direct window {direct} exceeds the configured maximum {}",
                cfg.max_window
            )));
        }
        let a = |x: f64| c / (1.0 + x.powf(delta));
        let coeffs: Vec<f64> = (1..=direct).map(|j| a(j as f64)).collect();
        let ca = c.powf(alpha);
        let total = ca * power_series_sum(delta, alpha, 1);
        // Σ_{j ≥ from} a_j^α
        let rest = |from: i64| ca * power_series_sum(delta, alpha, from);

        let nn = n as i64;
        let far_start = ((cfg.far_factor * n as f64).ceil() as i64).max(direct as i64 + 1);
        let mut blocks = Vec::new();
        let mut approx = 0.0;
        let mut lo = direct as i64 + 1;
        let mut rest_lo = rest(lo);
        let quad_cfg = QuadConfig::with_tol(0.0, 1e-8);
        while lo < far_start {
            let len = nn.max((cfg.block_ratio * lo as f64).ceil() as i64);
            let hi = lo + len;
            let rest_hi = rest(hi);
            let mass = (rest_lo - rest_hi).max(0.0);
            let coef = (mass / len as f64).powf(1.0 / alpha);
            approx += quad::integrate(
                |x| (a(x) - coef).abs().powf(alpha),
                lo as f64 - 0.5,
                hi as f64 - 0.5,
                &quad_cfg,
            )
            .map(|r| r.value)
            .unwrap_or(f64::NAN);
            blocks.push(Block { lo, hi, coef });
            lo = hi;
            rest_lo = rest_hi;
        }
        let far_mass = rest_lo;
        // the shared far draw ignores how a_j shifts between t and t + n
        let shift = n as f64;
        approx += quad::integrate_power_tail(
            |x| {
                if x.is_infinite() {
                    return 0.0;
                }
                let s = x.powf(delta + 1.0);
                (s * (a(x) - a(x + shift))).abs().powf(alpha)
            },
            lo as f64 - 0.5,
            (delta + 1.0) * alpha,
            &quad_cfg,
        )
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
        let aggregated = rest(direct as i64 + 1);
        Ok(Self {
            alpha,
            sigma: params.sigma,
            n,
            first: 1,
            coeffs,
            far_scale: far_mass.powf(1.0 / alpha),
            report: TailReport {
                direct_window: direct,
                tail_blocks: blocks.len(),
                discarded_fraction: 0.0,
                aggregated_fraction: aggregated / total,
                approximation_fraction: approx / total,
            },
            blocks,
        })
    }

    pub fn report(&self) -> TailReport {
        self.report
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// One path of length `n` drawn from `rng`.
    pub fn simulate(&self, rng: &mut Rng) -> Vec<f64> {
        let n = self.n as i64;
        let alpha = self.alpha;
        let first = self.first;
        let last = first + self.coeffs.len() as i64 - 1;
        // explicit innovations cover indices [lowest, n - first]
        let b0 = last + 1;
        let lowest = if self.blocks.is_empty() { 1 - last } else { 1 - b0 };
        let highest = n - first;
        let count = (highest - lowest + 1).max(0) as usize;
        let z: Vec<f64> = (0..count).map(|_| standard_sas(rng, alpha)).collect();
        let zi = |i: i64| z[(i - lowest) as usize];

        let mut y = vec![0.0; self.n];
        for t in 1..=n {
            let mut s = 0.0;
            for (k, a) in self.coeffs.iter().enumerate() {
                s += a * zi(t - first - k as i64);
            }
            y[(t - 1) as usize] = s;
        }

        if !self.blocks.is_empty() {
            // r[t-1] holds R(t - B) for the current boundary B, where
            // R(x) = Σ_{i = x+1}^{n - B_0} Z(i)
            let mut r = vec![0.0; self.n];
            let mut boundary = b0;
            let fill_zone = |r: &mut Vec<f64>, top: f64, draws: &mut dyn FnMut(i64) -> f64, boundary: i64| {
                r[(n - 1) as usize] = top;
                for t in (2..=n).rev() {
                    r[(t - 2) as usize] = r[(t - 1) as usize] + draws(t - boundary);
                }
            };
            fill_zone(&mut r, 0.0, &mut |i| zi(i), boundary);
            for block in &self.blocks {
                debug_assert_eq!(block.lo, boundary);
                // step from R(1 - B) down to R(n - B') through Z(1 - B) and the shared run
                let below = if boundary == b0 {
                    zi(1 - boundary)
                } else {
                    standard_sas(rng, alpha)
                };
                let run = block.hi - block.lo - n;
                let shared = if run > 0 {
                    (run as f64).powf(1.0 / alpha) * standard_sas(rng, alpha)
                } else {
                    0.0
                };
                let top = r[0] + below + shared;
                let mut next = vec![0.0; self.n];
                fill_zone(&mut next, top, &mut |_| standard_sas(rng, alpha), block.hi);
                for t in 0..self.n {
                    y[t] += block.coef * (next[t] - r[t]);
                }
                r = next;
                boundary = block.hi;
            }
            let far = self.far_scale * standard_sas(rng, alpha);
            for v in y.iter_mut() {
                *v += far;
            }
        }
        for v in y.iter_mut() {
            *v *= self.sigma;
        }
        y
    }
}

/// `n` values of the linear SαS series from stream 0 of `seed`.
pub fn simulate_linear_sas(kernel: &Kernel, params: StableParams, n: usize, seed: u64) -> Result<SamplePath> {
    let sim = LinearSimulator::new(kernel, params, n, &LinearConfig::default())?;
    let mut r = rng::stream(seed, 0);
    Ok(SamplePath {
        values: sim.simulate(&mut r),
        time_step: 1.0,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_parameters() {
        assert!(StableParams::new(2.0, 1.0).is_err());
        assert!(StableParams::new(0.0, 1.0).is_err());
        assert!(StableParams::new(1.0, 0.0).is_err());
        let p = StableParams { alpha: 1.0, sigma: 1.0 };
        assert!(sample_sas(p, 0, 1).is_err());
    }

    #[test]
    fn cauchy_median_and_cdf() {
        let p = StableParams::new(1.0, 2.0).unwrap();
        let x = sample_sas(p, 1_000_000, 7).unwrap().values;
        let below = x.iter().filter(|v| **v <= 2.0).count() as f64 / x.len() as f64;
        // Cauchy cdf at x = σ is 1/2 + arctan(1)/π = 0.75
        assert!((below - 0.75).abs() < 0.005, "cdf {below}");
        let mut s = x.clone();
        s.sort_by(f64::total_cmp);
        assert!(s[s.len() / 2].abs() < 0.02);
    }

    #[test]
    fn same_seed_same_draws() {
        let p = StableParams::new(1.3, 0.5).unwrap();
        assert_eq!(sample_sas(p, 100, 3).unwrap(), sample_sas(p, 100, 3).unwrap());
        assert_ne!(sample_sas(p, 100, 3).unwrap().values, sample_sas(p, 100, 4).unwrap().values);
    }

    #[test]
    fn exponential_kernel_characteristic_function() {
        let k = Kernel::exponential(1.0, 1.0).unwrap();
        assert_eq!(char_univariate(0.0, &k, 1.0).unwrap(), 1.0);
        assert_relative_eq!(char_univariate(1.0, &k, 1.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        assert_eq!(char_univariate(-0.7, &k, 1.3).unwrap(), char_univariate(0.7, &k, 1.3).unwrap());
    }

    #[test]
    fn degenerate_kernel_is_identity() {
        let k = Kernel::steps(vec![1.0], 0, 1.0).unwrap();
        let p = StableParams::new(1.4, 1.0).unwrap();
        let sim = LinearSimulator::new(&k, p, 50, &LinearConfig::default()).unwrap();
        let mut r1 = rng::stream(11, 0);
        let mut r2 = rng::stream(11, 0);
        let y = sim.simulate(&mut r1);
        let z: Vec<f64> = (0..50).map(|_| standard_sas(&mut r2, 1.4)).collect();
        assert_eq!(y, z);
    }

    #[test]
    fn series_tail_report_is_small() {
        let k = Kernel::causal_series(0.0019, 1.0474).unwrap();
        let p = StableParams::new(1.56, 1.0).unwrap();
        let sim = LinearSimulator::new(&k, p, 1130, &LinearConfig::default()).unwrap();
        let r = sim.report();
        assert!(r.aggregated_fraction > 0.0 && r.aggregated_fraction < 0.05);
        assert!(r.approximation_fraction < 1e-4, "{r:?}");
        assert_eq!(r.discarded_fraction, 0.0);
    }

    #[test]
    fn block_sums_match_direct_convolution_in_distribution() {
        // with the tail aggregated, the marginal scale of Y must still be ‖a‖_α
        let (c, delta, alpha) = (1.0, 0.9, 1.5);
        let k = Kernel::causal_series(c, delta).unwrap();
        let p = StableParams::new(alpha, 1.0).unwrap();
        let cfg = LinearConfig {
            direct_window: Some(256),
            ..LinearConfig::default()
        };
        let sim = LinearSimulator::new(&k, p, 64, &cfg).unwrap();
        let mut r = rng::stream(5, 0);
        let mut first = Vec::new();
        for _ in 0..20000 {
            first.push(sim.simulate(&mut r)[63]);
        }
        let norm = k.alpha_norm(alpha).value.powf(1.0 / alpha);
        // the median of |X| for SαS(σ) is σ times that of the standard law
        let mut abs: Vec<f64> = first.iter().map(|v| v.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let mut r2 = rng::stream(6, 0);
        let mut reference: Vec<f64> = (0..200000).map(|_| standard_sas(&mut r2, alpha).abs()).collect();
        reference.sort_by(f64::total_cmp);
        let ratio = abs[abs.len() / 2] / reference[reference.len() / 2];
        assert!((ratio / norm - 1.0).abs() < 0.03, "ratio {ratio} vs norm {norm}");
    }
}
