use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quad::{self, QuadConfig};
use crate::stable::check_alpha;

use super::DiscreteMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionConfig {
    /// Target absolute error of the integrated covariance.
    pub abs_tol: f64,
    /// Relative tolerance of each characteristic-exponent quadrature.
    pub char_rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for ExcursionConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-6,
            char_rel_tol: 1e-10,
            max_intervals: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionResult {
    pub value: f64,
    /// Quadrature error estimate plus the truncation bounds below.
    pub error: f64,
    /// Bound on the discarded region near the origin of `(s1, s2)`.
    pub near_origin_bound: f64,
    /// Bound on the discarded region at large `s`.
    pub far_bound: f64,
    /// Integration box `[s_min, s_max]²`.
    pub s_min: f64,
    pub s_max: f64,
    pub spectral_covariance: f64,
}

/// Characteristic-function differences of `(X(0), X(t))` at `(s1, s2)`.
pub(crate) struct Brackets<'a> {
    pub kernel: &'a Kernel,
    pub alpha: f64,
    pub t: f64,
    pub norm: f64,
    pub cfg: QuadConfig,
}

impl Brackets<'_> {
    /// The two brackets of the symmetric inversion formula,
    /// `(φ_t(s1,-s2) - φ_t(s1,s2), φ_t(s1,-s2) + φ_t(s1,s2) - 2 φ(s1) φ(s2))`.
    pub fn eval(&self, s1: f64, s2: f64) -> Result<(f64, f64)> {
        let (minus, plus) = self.deviations(s1, s2)?;
        Ok((minus - plus, minus + plus))
    }

    /// `(φ_t(s1,-s2) - φ(s1)φ(s2), φ_t(s1,s2) - φ(s1)φ(s2))`.
    pub fn deviations(&self, s1: f64, s2: f64) -> Result<(f64, f64)> {
        let a = self.kernel.char_exponent(s1, -s2, self.t, self.alpha, &self.cfg)?.value;
        let b = self.kernel.char_exponent(s1, s2, self.t, self.alpha, &self.cfg)?.value;
        let c = (s1.powf(self.alpha) + s2.powf(self.alpha)) * self.norm;
        Ok((exp_diff(a, c), exp_diff(b, c)))
    }
}

/// `e^{-x} - e^{-c}`, accurate when `x ≈ c`.
fn exp_diff(x: f64, c: f64) -> f64 {
    if (c - x).abs() < 1.0 {
        (-c).exp() * (c - x).exp_m1()
    } else {
        (-x).exp() - (-c).exp()
    }
}

/// Integration box in log coordinates `s = scale · e^y` for an integrand
/// bounded by `k_near e^{α(y1 + y2)/2}` near the origin and by
/// `k_far exp(-e^{α y} gap)` once `y = max(y1, y2)` is large.
pub(crate) struct LogBox {
    pub y_lo: f64,
    pub y_hi: f64,
    pub near_bound: f64,
    pub far_bound: f64,
}

pub(crate) fn log_box(alpha: f64, k_near: f64, k_far: f64, gap: f64, tol: f64) -> LogBox {
    let gap = gap.max(1e-6);
    // near side: the strips min(y1, y2) < y_lo under y_hi carry at most
    // 2 k_near (2/α)² e^{α(y_lo + y_hi)/2}
    let near_at = |y_lo: f64, y_hi: f64| 2.0 * k_near * (2.0 / alpha).powi(2) * (0.5 * alpha * (y_lo + y_hi)).exp();
    // far side: max(y1, y2) > y_hi, with the other coordinate over a strip of
    // length `width`; ∫_{y}^∞ exp(-e^{αz} g) dz ≤ exp(-e^{αy} g) / (α g e^{αy})
    let far_at = |y_hi: f64, width: f64| {
        let e = (alpha * y_hi).exp() * gap;
        2.0 * width * k_far * (-e).exp() / (alpha * e)
    };
    let mut width = 80.0;
    let mut y_hi = 0.0;
    let mut y_lo = -1.0;
    for _ in 0..4 {
        while far_at(y_hi, width) > 0.05 * tol && y_hi < 60.0 {
            y_hi += 0.25;
        }
        y_lo = if k_near > 0.0 {
            (2.0 / alpha) * (0.2 * tol / (2.0 * k_near * (2.0 / alpha).powi(2))).ln() - y_hi
        } else {
            y_hi - 1.0
        };
        y_lo = y_lo.min(y_hi - 1.0);
        let needed = y_hi - y_lo + 2.0 / alpha;
        if needed <= width {
            break;
        }
        width = needed;
    }
    LogBox {
        y_lo,
        y_hi,
        near_bound: near_at(y_lo, y_hi),
        far_bound: far_at(y_hi, width),
    }
}

/// `∫∫ Cov(1{X(0) > u}, 1{X(t) > v}) μ(du) μ(dv)` for the SαS moving
/// average with kernel `kernel`, by Fourier inversion of the bivariate
/// characteristic function:
///
/// `(1/2π²) ∫₀^∞∫₀^∞ [(φ_t(s1,-s2) - φ_t(s1,s2)) Reψ(s1)Reψ(s2)
///   + (φ_t(s1,-s2) + φ_t(s1,s2) - 2φ(s1)φ(s2)) Imψ(s1)Imψ(s2)] / (s1 s2) ds1 ds2`.
///
/// The integral is taken in log coordinates, where `ds/s = dy` removes
/// the singular weight. Near the origin the brackets are bounded by
/// `4 ρ_t (s1 s2)^{α/2} |ψ|²`, far out by `exp(-s^α (‖m‖_α^α - ρ_t))`;
/// both truncations are bounded analytically and added to the error.
pub fn excursion_cov_integrated(
    t: f64,
    kernel: &Kernel,
    alpha: f64,
    mu: &DiscreteMeasure,
    cfg: &ExcursionConfig,
) -> Result<ExcursionResult> {
    check_alpha(alpha)?;
    if !(cfg.abs_tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let norm = kernel.alpha_norm(alpha);
    if !norm.is_finite() {
        return Err(Error::Divergent(norm.divergence.unwrap_or_default()));
    }
    let n = norm.value;
    let rho = kernel.spectral_covariance(alpha, t)?;
    let scale = n.powf(-1.0 / alpha);
    let w = mu.total_weight();
    if rho <= 0.0 {
        // disjoint supports: the characteristic function factorises
        return Ok(ExcursionResult {
            value: 0.0,
            error: 0.0,
            near_origin_bound: 0.0,
            far_bound: 0.0,
            s_min: 0.0,
            s_max: 0.0,
            spectral_covariance: rho,
        });
    }
    let r = rho / n;
    let prefactor = 1.0 / (2.0 * PI * PI);
    let lb = log_box(alpha, prefactor * 4.0 * r * w * w, prefactor * 4.0 * w * w, 1.0 - r, cfg.abs_tol);

    let brackets = Brackets {
        kernel,
        alpha,
        t,
        norm: n,
        cfg: QuadConfig::with_tol(0.0, cfg.char_rel_tol),
    };
    let imaginary = mu.has_imaginary_part();
    let mut failure = None;
    let integrand = |y1: f64, y2: f64| -> f64 {
        let s1 = scale * y1.exp();
        let s2 = scale * y2.exp();
        match brackets.eval(s1, s2) {
            Ok((first, second)) => {
                let (re1, im1) = mu.fourier(s1);
                let (re2, im2) = mu.fourier(s2);
                let mut v = first * re1 * re2;
                if imaginary {
                    v += second * im1 * im2;
                }
                v
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let width = lb.y_hi - lb.y_lo;
    let outer = QuadConfig {
        abs_tol: 0.5 * cfg.abs_tol / prefactor,
        rel_tol: 0.0,
        max_intervals: cfg.max_intervals,
    };
    let inner = QuadConfig {
        abs_tol: 0.2 * cfg.abs_tol / prefactor / width,
        rel_tol: 0.0,
        max_intervals: cfg.max_intervals,
    };
    let res = quad::integrate_2d(integrand, (lb.y_lo, lb.y_hi), (lb.y_lo, lb.y_hi), &outer, &inner);
    if let Some(e) = failure {
        return Err(e);
    }
    let res = res?;
    let value = prefactor * res.value;
    let error = prefactor * res.error + lb.near_bound + lb.far_bound;
    if value < -(1e-8 + error) {
        return Err(Error::Inconsistent(format!(
            "integrated excursion covariance {value:e} is negative beyond its error {error:e}; positive association is violated"
        )));
    }
    Ok(ExcursionResult {
        value,
        error,
        near_origin_bound: lb.near_bound,
        far_bound: lb.far_bound,
        s_min: scale * lb.y_lo.exp(),
        s_max: scale * lb.y_hi.exp(),
        spectral_covariance: rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The complex-valued form of the inversion integrand, before the
    /// symmetric simplification.
    fn general_integrand(b: &Brackets, mu: &DiscreteMeasure, s1: f64, s2: f64) -> f64 {
        let (dm, dp) = b.deviations(s1, s2).unwrap();
        let (r1, i1) = mu.fourier(s1);
        let (r2, i2) = mu.fourier(s2);
        // Re{dm conj(ψ1) ψ2} - Re{dp conj(ψ1) conj(ψ2)}
        let conj1_psi2 = r1 * r2 + i1 * i2;
        let conj1_conj2 = r1 * r2 - i1 * i2;
        dm * conj1_psi2 - dp * conj1_conj2
    }

    #[test]
    fn symmetric_form_matches_general_form() {
        let k = Kernel::power_law(1.0, 1.2, 0.5, true).unwrap();
        let mu = DiscreteMeasure::new(vec![(0.3, 1.0), (-1.1, 0.4)]).unwrap();
        let b = Brackets {
            kernel: &k,
            alpha: 1.3,
            t: 0.7,
            norm: k.alpha_norm(1.3).value,
            cfg: QuadConfig::with_tol(0.0, 1e-12),
        };
        for (s1, s2) in [(0.1, 0.2), (1.0, 0.5), (2.0, 3.0), (0.01, 1.5)] {
            let (first, second) = b.eval(s1, s2).unwrap();
            let (r1, i1) = mu.fourier(s1);
            let (r2, i2) = mu.fourier(s2);
            let sym = first * r1 * r2 + second * i1 * i2;
            let gen = general_integrand(&b, &mu, s1, s2);
            assert!((sym - gen).abs() < 1e-13, "{sym} vs {gen}");
        }
    }

    #[test]
    fn disjoint_support_gives_zero() {
        let k = Kernel::indicator_unit();
        let r = excursion_cov_integrated(2.0, &k, 1.2, &DiscreteMeasure::dirac(0.0), &ExcursionConfig::default())
            .unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn exponential_kernel_reference_value() {
        // independent 2-D quadrature of the same formula in s-coordinates gives 0.098014
        let k = Kernel::exponential(1.0, 1.0).unwrap();
        let r = excursion_cov_integrated(1.0, &k, 1.0, &DiscreteMeasure::dirac(0.0), &ExcursionConfig::default())
            .unwrap();
        assert!((r.value - 0.0980137).abs() < 2e-6, "{r:?}");
        assert!(r.error < 1e-5);
    }

    #[test]
    fn small_lags_approach_the_variance() {
        // at t = 0 the covariance with μ = δ_0 is Var(1{X > 0}) = 1/4
        let k = Kernel::exponential(1.0, 1.0).unwrap();
        let cfg = ExcursionConfig {
            abs_tol: 1e-5,
            ..ExcursionConfig::default()
        };
        let r = excursion_cov_integrated(0.05, &k, 1.5, &DiscreteMeasure::dirac(0.0), &cfg).unwrap();
        assert!(r.value < 0.25 && r.value > 0.15, "{r:?}");
    }
}
