use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quad::{self, QuadConfig, QuadResult};
use crate::stable::check_alpha;

use super::excursion::{log_box, Brackets};

/// Outcome of the three elementary inequalities at one `(a, b, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    /// `||a|^α + |b|^α - |a - b|^α| ≤ 2 |ab|^{α/2}`.
    pub part_a: bool,
    /// `|a - b|^α ≤ a^α + b^α` for `a, b ≥ 0`.
    pub part_b: bool,
    /// `∫₀¹∫₀¹ [(a s1 + b s2)^α - |a s1 - b s2|^α] / (s1 s2) ≥ C_α min(a, b)^α`.
    pub part_c: bool,
    pub overlap_integral: f64,
    pub overlap_lower_bound: f64,
}

/// `(1 + u)^α - |1 - u|^α`, without cancellation near 0 and ∞.
fn h(u: f64, alpha: f64) -> f64 {
    // (1 + x)^α - (1 - x)^α for 0 ≤ x < 1
    let g = |x: f64| (1.0 - x).powf(alpha) * (alpha * (x.ln_1p() - (-x).ln_1p())).exp_m1();
    if u < 1.0 {
        g(u)
    } else if u > 1.0 {
        u.powf(alpha) * g(1.0 / u)
    } else {
        2f64.powf(alpha)
    }
}

fn cfg_1d() -> QuadConfig {
    QuadConfig::with_tol(1e-15, 1e-12)
}

/// `K(X) = ∫₀^X h(u)/u du`.
fn k_integral(x: f64, alpha: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let pts: Vec<f64> = if x > 1.0 { vec![0.0, 1.0, x] } else { vec![0.0, x] };
    Ok(quad::integrate_points(|u| if u == 0.0 { 2.0 * alpha } else { h(u, alpha) / u }, &pts, &cfg_1d())?.value)
}

/// `J(X) = ∫_X^∞ h(w) / w^{α+1} dw`.
fn j_integral(x: f64, alpha: f64) -> Result<f64> {
    let start = x.max(2.0);
    let mut total = quad::integrate_power_tail(
        |w| if w.is_finite() { h(w, alpha) * w.powf(1.0 - alpha) } else { 2.0 * alpha },
        start,
        2.0,
        &cfg_1d(),
    )?
    .value;
    if x < start {
        let pts: Vec<f64> = if x < 1.0 { vec![x, 1.0, start] } else { vec![x, start] };
        total += quad::integrate_points(|w| h(w, alpha) / w.powf(alpha + 1.0), &pts, &cfg_1d())?.value;
    }
    Ok(total)
}

/// `∫₀¹∫₀¹ [(a s1 + b s2)^α - |a s1 - b s2|^α] / (s1 s2) ds1 ds2` for
/// `a, b ≥ 0`, reduced to one dimension:
/// `(a^α/α) K(b/a) + (b^α/α) J(b/a)`.
pub fn overlap_integral(a: f64, b: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::invalid(format!("a and b must be nonnegative, got ({a}, {b})")));
    }
    if a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    // F is symmetric; keep the ratio ≤ 1 so K stays on [0, 1]
    let (a, b) = if b > a { (b, a) } else { (a, b) };
    let x = b / a;
    Ok((a.powf(alpha) * k_integral(x, alpha)? + b.powf(alpha) * j_integral(x, alpha)?) / alpha)
}

/// The same double integral by direct 2-D quadrature in `s = e^{-y}`
/// coordinates, truncated where the `2|ab|^{α/2}(s1 s2)^{α/2}` envelope
/// leaves less than a tenth of `tol`.
pub fn overlap_integral_2d(a: f64, b: f64, alpha: f64, tol: f64) -> Result<QuadResult> {
    check_alpha(alpha)?;
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::invalid(format!("a and b must be nonnegative, got ({a}, {b})")));
    }
    if a == 0.0 || b == 0.0 {
        return Ok(QuadResult::ZERO);
    }
    let env = 2.0 * (a * b).powf(0.5 * alpha);
    // ∫_{y1 > Y} ∫_0^∞ env e^{-α(y1 + y2)/2} = env (2/α)² e^{-αY/2}, both strips
    let y_max = (2.0 / alpha) * (2.0 * env * (2.0 / alpha).powi(2) / (0.1 * tol)).ln().max(1.0);
    let f = |y1: f64, y2: f64| {
        let (x, y) = (a * (-y1).exp(), b * (-y2).exp());
        (x + y).powf(alpha) - (x - y).abs().powf(alpha)
    };
    let outer = QuadConfig {
        abs_tol: 0.4 * tol,
        rel_tol: 0.0,
        max_intervals: 2000,
    };
    let inner = QuadConfig {
        abs_tol: 0.4 * tol / y_max,
        rel_tol: 0.0,
        max_intervals: 2000,
    };
    // the inner integrand has a kink where a e^{-y1} = b e^{-y2}
    let shift = (b / a).ln();
    let mut failure = None;
    let (mut inner_err, mut nodes, mut evals) = (0.0, 0usize, 0usize);
    let r = quad::integrate(
        |y1| {
            let kink = y1 + shift;
            let pts: Vec<f64> = if kink > 0.0 && kink < y_max { vec![0.0, kink, y_max] } else { vec![0.0, y_max] };
            match quad::integrate_points(|y2| f(y1, y2), &pts, &inner) {
                Ok(ri) => {
                    inner_err += ri.error;
                    nodes += 1;
                    evals += ri.evaluations;
                    ri.value
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        y_max,
        &outer,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(QuadResult {
        value: r.value,
        error: r.error + inner_err / nodes.max(1) as f64 * y_max + 0.1 * tol,
        evaluations: evals,
    })
}

/// `C_α = F(1, 1) = (2/α) ∫₀¹ [(1 + u)^α - (1 - u)^α] / u du`.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(2.0 / alpha * k_integral(1.0, alpha)?)
}

/// `4 (2^α - 1) / (α (α + 1))`.
pub fn c_alpha_lower_bound(alpha: f64) -> f64 {
    4.0 * (2f64.powf(alpha) - 1.0) / (alpha * (alpha + 1.0))
}

/// Checks the three inequalities at `(a, b, α)`; parts (b) and (c) use
/// `|a|, |b|`.
pub fn elementary_inequalities(a: f64, b: f64, alpha: f64) -> Result<InequalityReport> {
    check_alpha(alpha)?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("a and b must be finite"));
    }
    let slack = |x: f64| 1e-12 * x.abs().max(1e-300);
    let lhs_a = (a.abs().powf(alpha) + b.abs().powf(alpha) - (a - b).abs().powf(alpha)).abs();
    let rhs_a = 2.0 * (a * b).abs().powf(0.5 * alpha);
    let (pa, pb) = (a.abs(), b.abs());
    let lhs_b = (pa - pb).abs().powf(alpha);
    let rhs_b = pa.powf(alpha) + pb.powf(alpha);
    let f = overlap_integral(pa, pb, alpha)?;
    let lower = c_alpha(alpha)? * pa.min(pb).powf(alpha);
    Ok(InequalityReport {
        part_a: lhs_a <= rhs_a + slack(rhs_a),
        part_b: lhs_b <= rhs_b + slack(rhs_b),
        part_c: f >= lower - 1e-9 * lower.abs(),
        overlap_integral: f,
        overlap_lower_bound: lower,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationBound {
    pub rho: f64,
    pub norm: f64,
    /// `8π ρ_t / (α² sqrt(‖m‖_α^{2α} - ρ_t²))`.
    pub bound: f64,
    /// `8π ρ_t / (α² ‖m‖_α^{2α} sqrt(‖m‖_α^{2α} - ρ_t²))`; agrees with
    /// `bound` when `‖m‖_α^α = 1` but is not invariant under rescaling `m`.
    pub stated_bound: f64,
    /// `∫∫ |φ_t(s1, -s2) - φ(s1)φ(s2)| / (s1 s2)` over the positive quadrant.
    pub i1: f64,
    /// `∫∫ |φ_t(s1, s2) - φ(s1)φ(s2)| / (s1 s2)`.
    pub i2: f64,
    pub i1_error: f64,
    pub i2_error: f64,
}

impl DeviationBound {
    pub fn holds(&self) -> bool {
        self.i1 - self.i1_error <= self.bound && self.i2 - self.i2_error <= self.bound
    }

    pub fn holds_stated(&self) -> bool {
        self.i1 - self.i1_error <= self.stated_bound && self.i2 - self.i2_error <= self.stated_bound
    }
}

/// Evaluates the two characteristic-function deviation integrals and the
/// closed-form bound on them. `rel_tol` is relative to the bound.
pub fn char_deviation_bound(kernel: &Kernel, alpha: f64, t: f64, rel_tol: f64) -> Result<DeviationBound> {
    check_alpha(alpha)?;
    if t == 0.0 {
        return Err(Error::invalid("the bound is singular at t = 0"));
    }
    let norm = kernel.alpha_norm(alpha);
    if !norm.is_finite() {
        return Err(Error::Divergent(norm.divergence.unwrap_or_default()));
    }
    let n = norm.value;
    let rho = kernel.spectral_covariance(alpha, t)?;
    if rho >= n * (1.0 - 1e-12) {
        return Err(Error::invalid(format!("rho_t = rho_0 at t = {t}; the bound is singular")));
    }
    let root = (n * n - rho * rho).sqrt();
    let bound = 8.0 * PI * rho / (alpha * alpha * root);
    let stated_bound = bound / (n * n);
    if rho <= 0.0 {
        return Ok(DeviationBound {
            rho,
            norm: n,
            bound,
            stated_bound,
            i1: 0.0,
            i2: 0.0,
            i1_error: 0.0,
            i2_error: 0.0,
        });
    }
    let tol = rel_tol * bound.min(stated_bound);
    let r = rho / n;
    let lb = log_box(alpha, 2.0 * r, 2.0, 1.0 - r, tol);
    let scale = n.powf(-1.0 / alpha);
    let brackets = Brackets {
        kernel,
        alpha,
        t,
        norm: n,
        cfg: QuadConfig::with_tol(0.0, 1e-11),
    };
    let width = lb.y_hi - lb.y_lo;
    let outer = QuadConfig {
        abs_tol: 0.5 * tol,
        rel_tol: 0.0,
        max_intervals: 400,
    };
    let inner = QuadConfig {
        abs_tol: 0.2 * tol / width,
        rel_tol: 0.0,
        max_intervals: 400,
    };
    let mut out = [(0.0, 0.0); 2];
    for (idx, slot) in out.iter_mut().enumerate() {
        let mut failure = None;
        let r = quad::integrate_2d(
            |y1, y2| match brackets.deviations(scale * y1.exp(), scale * y2.exp()) {
                Ok((minus, plus)) => {
                    if idx == 0 {
                        minus.abs()
                    } else {
                        plus.abs()
                    }
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            (lb.y_lo, lb.y_hi),
            (lb.y_lo, lb.y_hi),
            &outer,
            &inner,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let r = r?;
        *slot = (r.value, r.error + lb.near_bound + lb.far_bound);
    }
    Ok(DeviationBound {
        rho,
        norm: n,
        bound,
        stated_bound,
        i1: out[0].0,
        i2: out[1].0,
        i1_error: out[0].1,
        i2_error: out[1].1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_alpha_at_one_is_closed_form() {
        // α = 1: h(u)/u = 2 on [0, 1], so C_1 = 2 · 2 = 4
        assert!((c_alpha(1.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn one_and_two_dimensional_routes_agree() {
        for (a, b, alpha) in [(1.0, 1.0, 0.5), (0.3, 2.0, 1.2), (1.5, 0.7, 1.8)] {
            let one = overlap_integral(a, b, alpha).unwrap();
            let two = overlap_integral_2d(a, b, alpha, 1e-8).unwrap();
            assert!((one - two.value).abs() < 1e-6, "{a} {b} {alpha}: {one} vs {two:?}");
        }
    }

    #[test]
    fn degenerate_inputs() {
        let r = elementary_inequalities(0.0, 2.0, 1.3).unwrap();
        assert!(r.part_a && r.part_b && r.part_c);
        assert_eq!(r.overlap_integral, 0.0);
        assert_eq!(r.overlap_lower_bound, 0.0);
    }

    #[test]
    fn symmetric_point_attains_the_constant() {
        let r = elementary_inequalities(1.7, 1.7, 0.8).unwrap();
        assert!((r.overlap_integral - r.overlap_lower_bound).abs() < 1e-12 * r.overlap_integral);
    }

    #[test]
    fn deviation_bound_rejects_zero_lag() {
        let k = Kernel::exponential(1.0, 1.0).unwrap();
        assert!(char_deviation_bound(&k, 1.0, 0.0, 1e-4).is_err());
    }

    #[test]
    fn corrected_deviation_bound_is_scale_free() {
        let k = Kernel::exponential(1.0, 1.0).unwrap();
        let a = char_deviation_bound(&k, 1.3, 1.0, 1e-3).unwrap();
        let b = char_deviation_bound(&k.scaled(3.0), 1.3, 1.0, 1e-3).unwrap();
        assert!((a.bound - b.bound).abs() < 1e-10 * a.bound);
        assert!((a.i1 - b.i1).abs() < 1e-3 * a.bound);
        assert!((a.stated_bound - b.stated_bound).abs() > 0.1 * a.stated_bound);
        assert!(a.holds() && b.holds());
    }
}
