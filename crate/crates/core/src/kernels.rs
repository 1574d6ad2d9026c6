//! Moving-average kernels `m ≥ 0`, their `L^p` norms and the pairwise
//! overlap integrals that drive every dependence quantity.
//!
//! Everything bivariate reduces to a cross integral
//! `∫ F(m(y), m(y + t)) dy` for a function `F` that is positively
//! homogeneous in `(a, b)`: the characteristic exponent uses
//! `|s1 a + s2 b|^α`, the α-spectral covariance `(ab)^{α/2}` and the
//! overlap bound `min(a, b)^α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig, QuadResult};

/// Decay of a kernel beyond its tabulated or plateau region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    /// Zero beyond the last grid point.
    Compact,
    /// `m(x) ~ x^{-exponent} (ln x)^{-log_exponent}`.
    Power { exponent: f64, log_exponent: f64 },
}

/// Asymptotic shape of one side of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailDecay {
    Compact,
    Exponential { rate: f64 },
    Power { exponent: f64, log_exponent: f64 },
}

/// Piecewise-linear kernel on a grid with a declared tail beyond the last
/// point. The kernel is zero left of the first grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedKernel {
    xs: Vec<f64>,
    values: Vec<f64>,
    tail: TailModel,
}

impl TabulatedKernel {
    pub fn new(xs: Vec<f64>, values: Vec<f64>, tail: TailModel) -> Result<Self> {
        if xs.len() < 2 || xs.len() != values.len() {
            return Err(Error::invalid(
                "tabulated kernel needs at least two (x, m) pairs",
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("tabulated grid must be finite and strictly increasing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("tabulated kernel values must be finite and nonnegative"));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("tabulated kernel is identically zero"));
        }
        if let TailModel::Power {
            exponent,
            log_exponent,
        } = tail
        {
            let last = *xs.last().unwrap();
            if !(exponent > 0.0) || !(log_exponent >= 0.0) {
                return Err(Error::invalid("tail exponents must satisfy q > 0, beta >= 0"));
            }
            if log_exponent > 0.0 && !(last > 1.0) {
                return Err(Error::invalid(
                    "a logarithmic tail needs the last grid point beyond x = 1",
                ));
            }
            if !(last > 0.0) {
                return Err(Error::invalid("a power tail needs the last grid point at x > 0"));
            }
        }
        Ok(Self { xs, values, tail })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    fn last(&self) -> (f64, f64) {
        (*self.xs.last().unwrap(), *self.values.last().unwrap())
    }

    fn value(&self, x: f64) -> f64 {
        let (xn, mn) = self.last();
        if x < self.xs[0] {
            return 0.0;
        }
        if x > xn {
            return match self.tail {
                TailModel::Compact => 0.0,
                TailModel::Power {
                    exponent,
                    log_exponent,
                } => {
                    let mut v = mn * (x / xn).powf(-exponent);
                    if log_exponent > 0.0 {
                        v *= (x.ln() / xn.ln()).powf(-log_exponent);
                    }
                    v
                }
            };
        }
        let i = match self.xs.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => return self.values[i],
            Err(i) => i,
        };
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    /// `m(x) x^q (ln x)^β` for `x` in the tail, a constant by construction.
    fn tail_profile_constant(&self) -> f64 {
        let (xn, mn) = self.last();
        match self.tail {
            TailModel::Compact => 0.0,
            TailModel::Power {
                exponent,
                log_exponent,
            } => {
                let mut k = mn * xn.powf(exponent);
                if log_exponent > 0.0 {
                    k *= xn.ln().powf(log_exponent);
                }
                k
            }
        }
    }
}

/// A nonnegative moving-average kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `m(x) = C max(|x|, a)^{-δ}`; with `symmetric = false` the kernel is
    /// causal (zero for `x < 0`).
    PowerLaw {
        c: f64,
        delta: f64,
        cutoff: f64,
        symmetric: bool,
    },
    /// `m(x) = c / (1 + k^δ)` on `[k - 1, k)`, `k = 1, 2, …`.
    CausalSeries { c: f64, delta: f64 },
    /// `m(x) = a_j` on `[(j - 1) w, j w)` for `j = first_index, …`.
    StepCoefficients {
        coeffs: Vec<f64>,
        first_index: i64,
        width: f64,
    },
    /// `m(x) = C e^{-λ x}` for `x ≥ 0`.
    Exponential { c: f64, rate: f64 },
    Tabulated(TabulatedKernel),
}

/// Value of `‖m‖_p^p`, which may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaNorm {
    pub value: f64,
    /// The violated integrability condition when `value` is infinite.
    pub divergence: Option<String>,
}

impl AlphaNorm {
    fn finite(value: f64) -> Self {
        Self {
            value,
            divergence: None,
        }
    }

    fn infinite(reason: impl Into<String>) -> Self {
        Self {
            value: f64::INFINITY,
            divergence: Some(reason.into()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Homogeneous pair functions integrated against `(m(y), m(y + t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Pair {
    /// `|s1 a + s2 b|^α`
    Stable { s1: f64, s2: f64, alpha: f64 },
    /// `(a b)^{α/2}`
    Geometric { alpha: f64 },
    /// `min(a, b)^α`
    Minimum { alpha: f64 },
}

impl Pair {
    #[inline]
    fn eval(&self, a: f64, b: f64) -> f64 {
        match *self {
            Pair::Stable { s1, s2, alpha } => (s1 * a + s2 * b).abs().powf(alpha),
            Pair::Geometric { alpha } => {
                if a <= 0.0 || b <= 0.0 {
                    0.0
                } else {
                    (a * b).powf(0.5 * alpha)
                }
            }
            Pair::Minimum { alpha } => a.min(b).powf(alpha),
        }
    }

    fn degree(&self) -> f64 {
        match *self {
            Pair::Stable { alpha, .. } | Pair::Geometric { alpha } | Pair::Minimum { alpha } => {
                alpha
            }
        }
    }

    fn swapped(&self) -> Pair {
        match *self {
            Pair::Stable { s1, s2, alpha } => Pair::Stable {
                s1: s2,
                s2: s1,
                alpha,
            },
            other => other,
        }
    }

    /// Coefficients of the linear form whose zero set is a kink of `F`.
    fn kink_form(&self) -> Option<(f64, f64)> {
        match *self {
            Pair::Stable { s1, s2, .. } if s1 * s2 < 0.0 => Some((s1, s2)),
            _ => None,
        }
    }
}

/// Explicit terms summed before switching to the Euler–Maclaurin tail.
const SERIES_EXPLICIT: i64 = 512;
/// Terms summed explicitly on each side of a kink inside a series tail.
const KINK_GUARD: i64 = 16;

impl Kernel {
    pub fn power_law(c: f64, delta: f64, cutoff: f64, symmetric: bool) -> Result<Self> {
        let k = Kernel::PowerLaw {
            c,
            delta,
            cutoff,
            symmetric,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn causal_series(c: f64, delta: f64) -> Result<Self> {
        let k = Kernel::CausalSeries { c, delta };
        k.validate()?;
        Ok(k)
    }

    pub fn steps(coeffs: Vec<f64>, first_index: i64, width: f64) -> Result<Self> {
        let k = Kernel::StepCoefficients {
            coeffs,
            first_index,
            width,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn exponential(c: f64, rate: f64) -> Result<Self> {
        let k = Kernel::Exponential { c, rate };
        k.validate()?;
        Ok(k)
    }

    pub fn indicator_unit() -> Self {
        Kernel::StepCoefficients {
            coeffs: vec![1.0],
            first_index: 1,
            width: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            Kernel::PowerLaw {
                c, delta, cutoff, ..
            } => {
                positive(*c, "C")?;
                positive(*delta, "delta")?;
                if !(*cutoff >= 0.0 && cutoff.is_finite()) {
                    return Err(Error::invalid(format!("cutoff a must be >= 0, got {cutoff}")));
                }
            }
            Kernel::CausalSeries { c, delta } => {
                positive(*c, "c")?;
                positive(*delta, "delta")?;
            }
            Kernel::StepCoefficients { coeffs, width, .. } => {
                positive(*width, "step width")?;
                if coeffs.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                    return Err(Error::invalid("step coefficients must be finite and nonnegative"));
                }
                if coeffs.iter().all(|&a| a == 0.0) {
                    return Err(Error::invalid("step coefficients are all zero"));
                }
            }
            Kernel::Exponential { c, rate } => {
                positive(*c, "C")?;
                positive(*rate, "rate")?;
            }
            Kernel::Tabulated(_) => {}
        }
        Ok(())
    }

    /// Evaluates `m(x)`.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Kernel::PowerLaw {
                c,
                delta,
                cutoff,
                symmetric,
            } => {
                if !symmetric && x < 0.0 {
                    return 0.0;
                }
                let r = x.abs().max(*cutoff);
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    c * r.powf(-delta)
                }
            }
            Kernel::CausalSeries { c, delta } => {
                if x < 0.0 {
                    0.0
                } else {
                    let k = x.floor() + 1.0;
                    c / (1.0 + k.powf(*delta))
                }
            }
            Kernel::StepCoefficients {
                coeffs,
                first_index,
                width,
            } => {
                let j = (x / width).floor() as i64 + 1;
                let i = j - first_index;
                if i < 0 || i as usize >= coeffs.len() {
                    0.0
                } else {
                    coeffs[i as usize]
                }
            }
            Kernel::Exponential { c, rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    c * (-rate * x).exp()
                }
            }
            Kernel::Tabulated(tab) => tab.value(x),
        }
    }

    /// The kernel multiplied by `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> Self {
        match self.clone() {
            Kernel::PowerLaw {
                c,
                delta,
                cutoff,
                symmetric,
            } => Kernel::PowerLaw {
                c: c * lambda,
                delta,
                cutoff,
                symmetric,
            },
            Kernel::CausalSeries { c, delta } => Kernel::CausalSeries {
                c: c * lambda,
                delta,
            },
            Kernel::StepCoefficients {
                coeffs,
                first_index,
                width,
            } => Kernel::StepCoefficients {
                coeffs: coeffs.into_iter().map(|a| a * lambda).collect(),
                first_index,
                width,
            },
            Kernel::Exponential { c, rate } => Kernel::Exponential {
                c: c * lambda,
                rate,
            },
            Kernel::Tabulated(t) => Kernel::Tabulated(TabulatedKernel {
                values: t.values.iter().map(|v| v * lambda).collect(),
                ..t
            }),
        }
    }

    /// Closed interval outside of which `m` vanishes (may be infinite).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Kernel::PowerLaw { symmetric, .. } => {
                if *symmetric {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (0.0, f64::INFINITY)
                }
            }
            Kernel::CausalSeries { .. } | Kernel::Exponential { .. } => (0.0, f64::INFINITY),
            Kernel::StepCoefficients {
                coeffs,
                first_index,
                width,
            } => (
                (*first_index - 1) as f64 * width,
                (*first_index - 1 + coeffs.len() as i64) as f64 * width,
            ),
            Kernel::Tabulated(t) => {
                let hi = match t.tail {
                    TailModel::Compact => t.last().0,
                    TailModel::Power { .. } => f64::INFINITY,
                };
                (t.xs[0], hi)
            }
        }
    }

    /// Points where `m` has kinks or jumps, inside the region where the
    /// tail asymptotics do not yet apply. Infinite step series list only
    /// their first cell boundary.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Kernel::PowerLaw {
                cutoff, symmetric, ..
            } => {
                let mut b = vec![0.0];
                if *cutoff > 0.0 {
                    b.push(*cutoff);
                    if *symmetric {
                        b.push(-cutoff);
                    }
                }
                b.sort_by(f64::total_cmp);
                b
            }
            Kernel::CausalSeries { .. } => vec![0.0],
            Kernel::StepCoefficients {
                coeffs,
                first_index,
                width,
            } => (0..=coeffs.len() as i64)
                .map(|i| (first_index - 1 + i) as f64 * width)
                .collect(),
            Kernel::Exponential { .. } => vec![0.0],
            Kernel::Tabulated(t) => t.xs.clone(),
        }
    }

    /// Tail shapes as `x → -∞` and `x → +∞`.
    pub fn tails(&self) -> (TailDecay, TailDecay) {
        let power = |q: f64| TailDecay::Power {
            exponent: q,
            log_exponent: 0.0,
        };
        match self {
            Kernel::PowerLaw {
                delta, symmetric, ..
            } => {
                let left = if *symmetric {
                    power(*delta)
                } else {
                    TailDecay::Compact
                };
                (left, power(*delta))
            }
            Kernel::CausalSeries { delta, .. } => (TailDecay::Compact, power(*delta)),
            Kernel::StepCoefficients { .. } => (TailDecay::Compact, TailDecay::Compact),
            Kernel::Exponential { rate, .. } => {
                (TailDecay::Compact, TailDecay::Exponential { rate: *rate })
            }
            Kernel::Tabulated(t) => {
                let right = match t.tail {
                    TailModel::Compact => TailDecay::Compact,
                    TailModel::Power {
                        exponent,
                        log_exponent,
                    } => TailDecay::Power {
                        exponent,
                        log_exponent,
                    },
                };
                (TailDecay::Compact, right)
            }
        }
    }

    /// Whether `m` is monotone on each tail (nondecreasing far left,
    /// nonincreasing far right).
    pub fn eventually_monotone(&self) -> bool {
        true
    }

    /// `‖m‖_p^p = ∫ m(x)^p dx`.
    pub fn alpha_norm(&self, p: f64) -> AlphaNorm {
        if !(p > 0.0) {
            return AlphaNorm::infinite(format!("exponent p must be positive, got {p}"));
        }
        match self {
            Kernel::PowerLaw {
                c,
                delta,
                cutoff,
                symmetric,
            } => {
                if delta * p <= 1.0 {
                    return AlphaNorm::infinite(format!(
                        "power tail needs delta * p > 1 (delta = {delta}, p = {p})"
                    ));
                }
                if *cutoff == 0.0 {
                    return AlphaNorm::infinite(format!(
                        "zero cutoff makes |x|^(-delta p) non-integrable at the origin (delta * p = {})",
                        delta * p
                    ));
                }
                let sides = if *symmetric { 2.0 } else { 1.0 };
                let dp = delta * p;
                AlphaNorm::finite(sides * c.powf(p) * cutoff.powf(1.0 - dp) * dp / (dp - 1.0))
            }
            Kernel::CausalSeries { c, delta } => {
                if delta * p <= 1.0 {
                    return AlphaNorm::infinite(format!(
                        "series needs delta * p > 1 (delta = {delta}, p = {p})"
                    ));
                }
                let s = power_series_sum(*delta, p, 1);
                AlphaNorm::finite(c.powf(p) * s)
            }
            Kernel::StepCoefficients { coeffs, width, .. } => {
                AlphaNorm::finite(coeffs.iter().map(|a| a.powf(p)).sum::<f64>() * width)
            }
            Kernel::Exponential { c, rate } => AlphaNorm::finite(c.powf(p) / (p * rate)),
            Kernel::Tabulated(t) => tabulated_norm(t, p),
        }
    }

    /// `∫_{x}^{∞} m^p` (`right = true`) or `∫_{-∞}^{x} m^p`, used to bound
    /// truncated mass.
    pub fn tail_mass(&self, p: f64, x: f64, right: bool) -> f64 {
        let (lo, hi) = self.support();
        if right && x >= hi || !right && x <= lo {
            return 0.0;
        }
        match self {
            Kernel::PowerLaw {
                c, delta, cutoff, ..
            } if x.abs() >= *cutoff && (right == (x > 0.0)) => {
                let dp = delta * p;
                c.powf(p) * x.abs().powf(1.0 - dp) / (dp - 1.0)
            }
            Kernel::CausalSeries { c, delta } if right && x >= 0.0 => {
                // partial cell k = floor(x) + 1, then whole cells from ceil(x) + 1
                let k = x.floor() + 1.0;
                let partial = (k - x) * (1.0 + k.powf(*delta)).powf(-p);
                let whole = power_series_sum(*delta, p, k as i64 + 1);
                c.powf(p) * (partial + whole)
            }
            Kernel::Exponential { c, rate } if right && x >= 0.0 => {
                c.powf(p) * (-rate * p * x).exp() / (rate * p)
            }
            Kernel::Tabulated(t) if right && x >= t.last().0 => {
                tabulated_tail_integral(t, p, x).unwrap_or(f64::INFINITY)
            }
            _ => {
                let norm = self.alpha_norm(p).value;
                let cfg = QuadConfig::with_tol(1e-14, 1e-10);
                let mut pts: Vec<f64> = self
                    .breakpoints()
                    .into_iter()
                    .filter(|b| b.is_finite())
                    .collect();
                let (a, b) = if right {
                    let end = self.finite_core_end();
                    pts.push(x);
                    pts.push(end);
                    (x, end)
                } else {
                    let start = self.finite_core_start();
                    pts.push(x);
                    pts.push(start);
                    (start, x)
                };
                pts.retain(|v| *v >= a && *v <= b);
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                let core = quad::integrate_points(|y| self.value(y).powf(p), &pts, &cfg)
                    .map(|r| r.value)
                    .unwrap_or(norm);
                let outer = if right {
                    self.tail_mass(p, b, true)
                } else {
                    self.tail_mass(p, a, false)
                };
                if a >= b {
                    outer
                } else {
                    core + outer
                }
            }
        }
    }

    pub(crate) fn finite_core_end(&self) -> f64 {
        match self {
            Kernel::PowerLaw { cutoff, .. } => cutoff.max(1.0),
            Kernel::CausalSeries { .. } => 1.0,
            Kernel::Exponential { .. } => 0.0,
            Kernel::StepCoefficients { .. } => self.support().1,
            Kernel::Tabulated(t) => t.last().0,
        }
    }

    pub(crate) fn finite_core_start(&self) -> f64 {
        match self {
            Kernel::PowerLaw {
                cutoff, symmetric, ..
            } => {
                if *symmetric {
                    -cutoff.max(1.0)
                } else {
                    0.0
                }
            }
            _ => self.support().0,
        }
    }

    /// α-spectral covariance `ρ_t = ∫ m(-x)^{α/2} m(t-x)^{α/2} dx`.
    pub fn spectral_covariance(&self, alpha: f64, t: f64) -> Result<f64> {
        Ok(self
            .cross_integral(Pair::Geometric { alpha }, t, &QuadConfig::with_tol(1e-14, 1e-12))?
            .value)
    }

    /// `∫ |s1 m(-x) + s2 m(t-x)|^α dx`, the exponent of the bivariate
    /// characteristic function of `(X(0), X(t))`.
    pub fn char_exponent(
        &self,
        s1: f64,
        s2: f64,
        t: f64,
        alpha: f64,
        cfg: &QuadConfig,
    ) -> Result<QuadResult> {
        if s1 == 0.0 && s2 == 0.0 {
            return Ok(QuadResult::ZERO);
        }
        self.cross_integral(Pair::Stable { s1, s2, alpha }, t, cfg)
    }

    /// `∫ min(m(-x), m(t-x))^α dx`.
    pub fn min_overlap(&self, alpha: f64, t: f64) -> Result<f64> {
        Ok(self
            .cross_integral(Pair::Minimum { alpha }, t, &QuadConfig::with_tol(1e-14, 1e-11))?
            .value)
    }

    /// `∫ F(m(y), m(y + t)) dy` for a homogeneous pair function `F`.
    pub(crate) fn cross_integral(&self, pair: Pair, t: f64, cfg: &QuadConfig) -> Result<QuadResult> {
        if !t.is_finite() {
            return Err(Error::invalid(format!("lag must be finite, got {t}")));
        }
        if t < 0.0 {
            return self.cross_integral(pair.swapped(), -t, cfg);
        }
        let norm = self.alpha_norm(pair.degree());
        if !norm.is_finite() {
            return Err(Error::Divergent(format!(
                "kernel has infinite L^{} norm: {}",
                pair.degree(),
                norm.divergence.unwrap_or_default()
            )));
        }
        match self {
            Kernel::Exponential { c, rate } => {
                let p = pair.degree();
                let decay = (-rate * t).exp();
                let value = c.powf(p) / (rate * p)
                    * (pair.eval(1.0, decay) + pair.eval(0.0, 1.0) * (1.0 - (-rate * p * t).exp()));
                Ok(QuadResult {
                    value,
                    error: 0.0,
                    evaluations: 0,
                })
            }
            Kernel::StepCoefficients {
                coeffs,
                first_index,
                width,
            } => Ok(step_cross(
                &StepView {
                    width: *width,
                    first: *first_index,
                    coeffs,
                    series: None,
                },
                pair,
                t,
                cfg,
            )?),
            Kernel::CausalSeries { c, delta } => step_cross(
                &StepView {
                    width: 1.0,
                    first: 1,
                    coeffs: &[],
                    series: Some((*c, *delta)),
                },
                pair,
                t,
                cfg,
            ),
            Kernel::PowerLaw { .. } | Kernel::Tabulated(_) => continuous_cross(self, pair, t, cfg),
        }
    }
}

/// `Σ_{k ≥ first} (1 + k^δ)^{-p}`, explicit head plus Euler–Maclaurin tail.
pub(crate) fn power_series_sum(delta: f64, p: f64, first: i64) -> f64 {
    let a = |x: f64| (1.0 + x.powf(delta)).powf(-p);
    let k_end = first.max(1) + SERIES_EXPLICIT;
    let mut head = 0.0;
    for k in first..k_end {
        head += a(k as f64);
    }
    let dp = delta * p;
    let x0 = k_end as f64 - 0.5;
    let profile = |x: f64| {
        if x.is_infinite() {
            1.0
        } else {
            // (1 + x^δ)^{-p} x^{δp} = (x^{-δ} + 1)^{-p}
            (x.powf(-delta) + 1.0).powf(-p)
        }
    };
    let tail = quad::integrate_power_tail(profile, x0, dp, &QuadConfig::with_tol(0.0, 1e-13))
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    head + tail + derivative(a, x0) / 24.0
}

fn derivative<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = 1e-4 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn tabulated_norm(t: &TabulatedKernel, p: f64) -> AlphaNorm {
    if let TailModel::Power {
        exponent,
        log_exponent,
    } = t.tail
    {
        let q = exponent * p;
        let b = log_exponent * p;
        if q < 1.0 || (q == 1.0 && b <= 1.0) {
            return AlphaNorm::infinite(format!(
                "declared tail m ~ x^-{exponent} (ln x)^-{log_exponent} is not p-integrable for p = {p}"
            ));
        }
    }
    let mut total = 0.0;
    for w in t.xs.windows(2).zip(t.values.windows(2)) {
        let ((x0, x1), (v0, v1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
        let seg = if v0 == v1 {
            v0.powf(p) * (x1 - x0)
        } else if p == 1.0 {
            0.5 * (v0 + v1) * (x1 - x0)
        } else {
            // exact for linear interpolation: ∫ ℓ^p = (x1 - x0)(v1^{p+1} - v0^{p+1}) / ((p + 1)(v1 - v0))
            (x1 - x0) * (v1.powf(p + 1.0) - v0.powf(p + 1.0)) / ((p + 1.0) * (v1 - v0))
        };
        total += seg;
    }
    match tabulated_tail_integral(t, p, t.last().0) {
        Ok(tail) => AlphaNorm::finite(total + tail),
        Err(e) => AlphaNorm::infinite(e.to_string()),
    }
}

/// `∫_x^∞ m^p` for `x` at or beyond the last grid point.
fn tabulated_tail_integral(t: &TabulatedKernel, p: f64, x: f64) -> Result<f64> {
    let TailModel::Power {
        exponent,
        log_exponent,
    } = t.tail
    else {
        return Ok(0.0);
    };
    let k = t.tail_profile_constant().powf(p);
    tail_integral(|_| k, x, exponent * p, log_exponent * p, &[], &QuadConfig::with_tol(0.0, 1e-12))
        .map(|r| r.value)
}

/// `∫_{x0}^∞ profile(x) x^{-q} (ln x)^{-b} dx` for bounded `profile`.
fn tail_integral<H: FnMut(f64) -> f64>(
    mut profile: H,
    x0: f64,
    q: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    if b == 0.0 && q > 1.0 {
        return quad::integrate_power_tail_points(profile, x0, q, breaks, cfg);
    }
    if !(x0 > 1.0) {
        return Err(Error::invalid("logarithmic tail needs x0 > 1"));
    }
    if q > 1.0 + 1e-12 {
        return quad::integrate_power_tail_points(
            |x| {
                if x.is_infinite() {
                    0.0
                } else {
                    profile(x) * x.ln().powf(-b)
                }
            },
            x0,
            q,
            breaks,
            cfg,
        );
    }
    if (q - 1.0).abs() <= 1e-12 && b > 1.0 {
        // x = e^z turns x^{-1} (ln x)^{-b} dx into z^{-b} dz
        let zb: Vec<f64> = breaks.iter().filter(|v| **v > x0).map(|v| v.ln()).collect();
        return quad::integrate_power_tail_points(
            |z| profile(if z.is_infinite() { z } else { z.exp() }),
            x0.ln(),
            b,
            &zb,
            cfg,
        );
    }
    Err(Error::Divergent(format!(
        "tail x^-{q} (ln x)^-{b} is not integrable"
    )))
}

struct StepView<'a> {
    width: f64,
    first: i64,
    coeffs: &'a [f64],
    /// `(c, δ)` for the infinite series `a_k = c / (1 + k^δ)`, `k ≥ first`.
    series: Option<(f64, f64)>,
}

impl StepView<'_> {
    #[inline]
    fn coef(&self, j: i64) -> f64 {
        if j < self.first {
            return 0.0;
        }
        match self.series {
            Some((c, delta)) => c / (1.0 + (j as f64).powf(delta)),
            None => {
                let i = (j - self.first) as usize;
                self.coeffs.get(i).copied().unwrap_or(0.0)
            }
        }
    }

    fn last(&self) -> i64 {
        self.first + self.coeffs.len() as i64 - 1
    }
}

/// Cross integral for step kernels. With `t = (q + f) w`, cell `j` of `y`
/// overlaps cell `j + q` of `y + t` over a fraction `1 - f` and cell
/// `j + q + 1` over the fraction `f`.
fn step_cross(view: &StepView, pair: Pair, t: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    let tau = t / view.width;
    let mut q = tau.floor();
    let mut f = tau - q;
    if f > 1.0 - 1e-13 {
        q += 1.0;
        f = 0.0;
    } else if f < 1e-13 {
        f = 0.0;
    }
    let q = q as i64;
    let cell = |j: i64| -> f64 {
        let a = view.coef(j);
        let mut v = (1.0 - f) * pair.eval(a, view.coef(j + q));
        if f > 0.0 {
            v += f * pair.eval(a, view.coef(j + q + 1));
        }
        v
    };
    let start = view.first - q - 1;
    match view.series {
        None => {
            let mut s = 0.0;
            for j in start..=view.last() {
                s += cell(j);
            }
            Ok(QuadResult {
                value: s * view.width,
                error: 0.0,
                evaluations: 0,
            })
        }
        Some((c, delta)) => {
            let k_end = view.first.max(1) + SERIES_EXPLICIT;
            let mut head = 0.0;
            for j in start..k_end {
                head += cell(j);
            }
            let tail = series_tail(c, delta, q, f, pair, k_end, cfg)?;
            Ok(QuadResult {
                value: (head + tail.value) * view.width,
                error: tail.error * view.width,
                evaluations: tail.evaluations,
            })
        }
    }
}

/// `Σ_{k ≥ k0} g(k)` for the smooth extension `g` of a step-series cell
/// term, by Euler–Maclaurin (midpoint form). Kinks of `g` (sign changes of
/// `s1 a(x) + s2 a(x + shift)`) are fenced off and summed explicitly.
fn series_tail(
    c: f64,
    delta: f64,
    q: i64,
    f: f64,
    pair: Pair,
    k0: i64,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    let qf = q as f64;
    let a = |x: f64| c / (1.0 + x.powf(delta));
    let g = |x: f64| {
        let ax = a(x);
        let mut v = (1.0 - f) * pair.eval(ax, a(x + qf));
        if f > 0.0 {
            v += f * pair.eval(ax, a(x + qf + 1.0));
        }
        v
    };
    let p = pair.degree();
    let dp = delta * p;
    // g(x) x^{δp}, evaluated with rescaled coefficients to avoid overflow
    let profile = |x: f64| {
        if x.is_infinite() {
            return pair.eval(c, c);
        }
        let r = |y: f64| c / (x.powf(-delta) + (y / x).powf(delta));
        let ax = r(x);
        let mut v = (1.0 - f) * pair.eval(ax, r(x + qf));
        if f > 0.0 {
            v += f * pair.eval(ax, r(x + qf + 1.0));
        }
        v
    };

    let mut kinks: Vec<f64> = Vec::new();
    if let Some((s1, s2)) = pair.kink_form() {
        for (shift, weight) in [(qf, 1.0 - f), (qf + 1.0, f)] {
            if weight <= 0.0 {
                continue;
            }
            let h = |x: f64| s1 * a(x) + s2 * a(x + shift);
            if let Some(r) = tail_root(h, k0 as f64, s1 + s2) {
                kinks.push(r);
            }
        }
    }
    kinks.sort_by(f64::total_cmp);

    let log_cfg = *cfg;
    let finite_integral = |lo: f64, hi: f64| -> Result<QuadResult> {
        quad::integrate(|z: f64| {
            let x = z.exp();
            g(x) * x
        }, lo.ln(), hi.ln(), &log_cfg)
    };

    let mut total = QuadResult::ZERO;
    let mut explicit = 0.0;
    let mut next = k0;
    for r in kinks {
        let lo = (r.floor() as i64 - KINK_GUARD).max(next);
        let hi = r.floor() as i64 + KINK_GUARD;
        if lo > next {
            let (x_lo, x_hi) = (next as f64 - 0.5, (lo - 1) as f64 + 0.5);
            total = total + finite_integral(x_lo, x_hi)?;
            explicit -= (derivative(g, x_hi) - derivative(g, x_lo)) / 24.0;
        }
        for k in lo.max(next)..=hi {
            explicit += g(k as f64);
        }
        next = next.max(hi + 1);
    }
    let x_lo = next as f64 - 0.5;
    total = total + quad::integrate_power_tail(profile, x_lo, dp, cfg)?;
    explicit += derivative(g, x_lo) / 24.0;
    Ok(QuadResult {
        value: total.value + explicit,
        ..total
    })
}

/// Root of `h` beyond `x0` when `h(x0)` and the asymptotic sign disagree.
/// Power-law tails have `a(x)/a(x + s) → 1`, so `h` eventually carries the
/// sign of `s1 + s2`.
fn tail_root<H: Fn(f64) -> f64>(h: H, x0: f64, asymptotic: f64) -> Option<f64> {
    if asymptotic == 0.0 {
        return None;
    }
    let h0 = h(x0);
    if h0 == 0.0 || (h0 > 0.0) == (asymptotic > 0.0) {
        return None;
    }
    let mut lo = x0;
    let mut hi = x0.max(1.0) * 2.0;
    for _ in 0..200 {
        let v = h(hi);
        if v != 0.0 && (v > 0.0) == (asymptotic > 0.0) {
            return Some(quad::bisect(&h, lo, hi, 1e-12));
        }
        if !hi.is_finite() || hi > 1e300 {
            return None;
        }
        lo = hi;
        hi *= 2.0;
    }
    None
}

/// Cross integral for kernels evaluated pointwise (power law, tabulated).
fn continuous_cross(kernel: &Kernel, pair: Pair, t: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    let m = |y: f64| kernel.value(y);
    let integrand = |y: f64| pair.eval(m(y), m(y + t));
    let (lo, hi) = kernel.support();
    let (left_tail, right_tail) = kernel.tails();

    let mut breaks: Vec<f64> = Vec::new();
    for b in kernel.breakpoints() {
        breaks.push(b);
        breaks.push(b - t);
    }
    // finite core [core_lo, core_hi]; outside it both m(y) and m(y + t)
    // follow their tail asymptotics
    let core_lo = if lo.is_finite() {
        lo - t
    } else {
        kernel.finite_core_start() - t - 1.0
    };
    let core_hi = if hi.is_finite() {
        hi
    } else {
        kernel.finite_core_end().max(1.0) + 1.0
    };
    breaks.push(core_lo);
    breaks.push(core_hi);
    breaks.retain(|b| *b >= core_lo && *b <= core_hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut core_points = breaks.clone();
    let mut right_breaks = Vec::new();
    let mut left_breaks = Vec::new();
    if let Some((s1, s2)) = pair.kink_form() {
        let h = |y: f64| s1 * m(y) + s2 * m(y + t);
        for w in breaks.windows(2) {
            let n = 32;
            let step = (w[1] - w[0]) / n as f64;
            let mut prev_x = w[0];
            let mut prev = h(prev_x + 1e-14 * step);
            for i in 1..=n {
                let x = if i == n { w[1] } else { w[0] + step * i as f64 };
                let v = h(if i == n { x - 1e-14 * step } else { x });
                if prev != 0.0 && v != 0.0 && (prev > 0.0) != (v > 0.0) {
                    core_points.push(quad::bisect(&h, prev_x, x, 1e-12));
                }
                prev = v;
                prev_x = x;
            }
        }
        if !matches!(right_tail, TailDecay::Compact) {
            if let Some(r) = tail_root(h, core_hi, s1 + s2) {
                right_breaks.push(r);
            }
        }
        if !matches!(left_tail, TailDecay::Compact) {
            let hl = |z: f64| h(-z);
            if let Some(r) = tail_root(hl, -core_lo, s1 + s2) {
                left_breaks.push(r);
            }
        }
        core_points.sort_by(f64::total_cmp);
        core_points.dedup();
    }

    let mut total = quad::integrate_points(integrand, &core_points, cfg)?;

    if let TailDecay::Power {
        exponent,
        log_exponent,
    } = right_tail
    {
        let p = pair.degree();
        let scale = |y: f64| {
            let mut s = y.powf(exponent);
            if log_exponent > 0.0 {
                s *= y.ln().powf(log_exponent);
            }
            s
        };
        let limit = match kernel {
            Kernel::Tabulated(tab) => tab.tail_profile_constant(),
            Kernel::PowerLaw { c, .. } => *c,
            _ => unreachable!("continuous kernels are power law or tabulated"),
        };
        let profile = |y: f64| {
            if y.is_infinite() {
                return pair.eval(limit, limit);
            }
            let s = scale(y);
            pair.eval(m(y) * s, m(y + t) * s)
        };
        total = total
            + tail_integral(
                profile,
                core_hi,
                exponent * p,
                log_exponent * p,
                &right_breaks,
                cfg,
            )?;
    }
    if let TailDecay::Power { exponent, .. } = left_tail {
        // only symmetric power laws have a left tail
        let p = pair.degree();
        let c = match kernel {
            Kernel::PowerLaw { c, .. } => *c,
            _ => unreachable!("left tails only occur for symmetric power laws"),
        };
        let profile = |z: f64| {
            if z.is_infinite() {
                return pair.eval(c, c);
            }
            let s = z.powf(exponent);
            pair.eval(m(-z) * s, m(t - z) * s)
        };
        total = total
            + quad::integrate_power_tail_points(profile, -core_lo, exponent * p, &left_breaks, cfg)?;
    }
    Ok(total)
}
