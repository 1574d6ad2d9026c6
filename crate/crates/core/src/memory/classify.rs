use crate::kernels::{Kernel, TailDecay};
use crate::quad::{self, QuadConfig};

use super::{MemoryVerdict, Rule, Verdict};

/// Exponent comparisons within this tolerance count as equalities, so the
/// closed endpoint `δ = 2/α` survives floating-point rounding of `2/α`.
const EXPONENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct SideAnalysis {
    /// `m^α` integrable on this side.
    alpha_integrable: bool,
    /// `m^{α/2}` integrable on this side.
    half_integrable: bool,
    /// `∫ |x| m^α(x) dx = ∞` on this side.
    moment_diverges: bool,
    /// `q α` for power tails.
    tail_product: Option<f64>,
}

fn analyse(side: TailDecay, alpha: f64) -> SideAnalysis {
    match side {
        TailDecay::Compact | TailDecay::Exponential { .. } => SideAnalysis {
            alpha_integrable: true,
            half_integrable: true,
            moment_diverges: false,
            tail_product: None,
        },
        TailDecay::Power {
            exponent,
            log_exponent,
        } => {
            let qa = exponent * alpha;
            let ba = log_exponent * alpha;
            // ∫^∞ x^{-s} (ln x)^{-b} dx < ∞ iff s > 1, or s = 1 and b > 1
            let integrable = |s: f64, b: f64| s > 1.0 + EXPONENT_TOL || ((s - 1.0).abs() <= EXPONENT_TOL && b > 1.0);
            SideAnalysis {
                alpha_integrable: integrable(qa, ba),
                half_integrable: integrable(qa / 2.0, ba / 2.0),
                // x m^α(x) ~ x^{1 - qα} (ln x)^{-βα}
                moment_diverges: !integrable(qa - 1.0, ba),
                tail_product: Some(qa),
            }
        }
    }
}

/// `∫_{x0}^{h} x m^α(x) dx` on the right tail, in log coordinates.
fn partial_moment(kernel: &Kernel, alpha: f64, x0: f64, h: f64) -> f64 {
    let cfg = QuadConfig::with_tol(0.0, 1e-8);
    quad::integrate(
        |z: f64| {
            let x = z.exp();
            x * x * kernel.value(x).powf(alpha)
        },
        x0.ln(),
        h.ln(),
        &cfg,
    )
    .map(|r| r.value)
    .unwrap_or(f64::NAN)
}

/// Decides SRD/LRD for the SαS moving average with kernel `kernel`.
///
/// In order: `m ∈ L^{α/2}` gives SRD; a divergent minimum-overlap double
/// integral gives LRD; an eventually monotone kernel with divergent tail
/// moment `∫ t m^α(t) dt` gives LRD. Otherwise the verdict is
/// indeterminate, unless `use_conjecture` is set and `m ∉ L^{α/2}`, in
/// which case it is LRD flagged as conjectured. Divergence is decided from
/// the tail exponents, never from a finite quadrature.
pub fn classify_memory(kernel: &Kernel, alpha: f64, use_conjecture: bool) -> MemoryVerdict {
    if !(alpha > 0.0 && alpha < 2.0) {
        return MemoryVerdict::indeterminate(format!("alpha must lie in (0, 2), got {alpha}"));
    }
    if let Err(e) = kernel.validate() {
        return MemoryVerdict::indeterminate(e.to_string());
    }
    let (left, right) = kernel.tails();
    let sides = [analyse(left, alpha), analyse(right, alpha)];
    let norm = kernel.alpha_norm(alpha);
    let half = kernel.alpha_norm(alpha / 2.0);
    let parametric_power = matches!(kernel, Kernel::PowerLaw { .. } | Kernel::CausalSeries { .. });

    let with_common = |v: MemoryVerdict| {
        let mut v = v
            .with("norm_alpha", norm.value)
            .with("norm_alpha_half", half.value);
        if let Some(qa) = sides.iter().filter_map(|s| s.tail_product).reduce(f64::min) {
            v = v.with("tail_exponent_times_alpha", qa);
        }
        if let Kernel::PowerLaw { delta, .. } | Kernel::CausalSeries { delta, .. } = kernel {
            v = v
                .with("delta", *delta)
                .with("lower_threshold", 1.0 / alpha)
                .with("upper_threshold", 2.0 / alpha);
        }
        v
    };

    let defined = sides.iter().all(|s| s.alpha_integrable) && norm.is_finite();
    if !defined {
        return with_common(MemoryVerdict::indeterminate(format!(
            "kernel is not in L^alpha, the moving average is not defined: {}",
            norm.divergence.clone().unwrap_or_else(|| "non-integrable tail".into())
        )));
    }

    let half_integrable = sides.iter().all(|s| s.half_integrable);
    if half_integrable {
        let supporting = if parametric_power {
            vec![Rule::PowerLawThreshold]
        } else {
            Vec::new()
        };
        let mut v = MemoryVerdict::decided(Verdict::Srd, Rule::AlphaHalfIntegrability, supporting);
        v.note = "spectral covariance is integrable over the lags".into();
        return with_common(v).with("integrated_spectral_covariance", half.value * half.value);
    }

    let moment_diverges = sides.iter().any(|s| s.moment_diverges);
    // for eventually monotone tails ∫∫ min(g(x), g(t)) = 2 ∫ g(t)(t - a) dt
    // plus a finite part, so both LRD criteria reduce to the tail moment
    let overlap_diverges = moment_diverges && kernel.eventually_monotone();

    let moments = |v: MemoryVerdict| {
        if !matches!(right, TailDecay::Power { .. }) {
            return v;
        }
        let x0 = kernel.support().0.max(0.0) + 1.0;
        let mut v = v;
        for (name, h) in [
            ("tail_moment_to_1e2", 1e2),
            ("tail_moment_to_1e4", 1e4),
            ("tail_moment_to_1e6", 1e6),
        ] {
            v = v.with(name, partial_moment(kernel, alpha, x0, h));
        }
        v
    };

    if overlap_diverges || moment_diverges {
        let (rule, mut supporting) = if overlap_diverges {
            (Rule::MinimumOverlapDivergence, vec![Rule::EventuallyMonotoneMoment])
        } else {
            (Rule::EventuallyMonotoneMoment, Vec::new())
        };
        if parametric_power {
            supporting.push(Rule::PowerLawThreshold);
        }
        let mut v = MemoryVerdict::decided(Verdict::Lrd, rule, supporting);
        v.note = "witness measure: point mass at level 0".into();
        return moments(with_common(v));
    }

    let mut v = MemoryVerdict::indeterminate(
        "kernel is outside L^(alpha/2) but the minimum-overlap integral converges; no theorem decides this case",
    );
    if use_conjecture {
        v = MemoryVerdict::decided(Verdict::Lrd, Rule::AlphaHalfConjecture, Vec::new());
        v.conjectured = true;
        v.note = "upgraded from Indeterminate by the L^(alpha/2) conjecture; not a proven verdict".into();
    }
    moments(with_common(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{TabulatedKernel, TailModel};

    fn power(delta: f64) -> Kernel {
        Kernel::power_law(1.0, delta, 1.0, false).unwrap()
    }

    #[test]
    fn power_law_thresholds() {
        let alpha = 1.56;
        for d in [0.70, 1.0, 1.0474, 2.0 / 1.56] {
            let v = classify_memory(&power(d), alpha, false);
            if d * alpha <= 1.0 {
                assert_eq!(v.verdict, Verdict::Indeterminate, "delta {d}");
            } else {
                assert_eq!(v.verdict, Verdict::Lrd, "delta {d}");
                assert!(v.rules().contains(&Rule::EventuallyMonotoneMoment));
                assert!(v.rules().contains(&Rule::PowerLawThreshold));
            }
        }
        for d in [1.29, 1.40, 2.0] {
            let v = classify_memory(&power(d), alpha, false);
            assert_eq!(v.verdict, Verdict::Srd, "delta {d}");
            assert_eq!(v.rule, Some(Rule::AlphaHalfIntegrability));
        }
    }

    #[test]
    fn compact_kernels_are_short_range() {
        for alpha in [0.3, 1.0, 1.9] {
            let v = classify_memory(&Kernel::indicator_unit(), alpha, false);
            assert_eq!(v.verdict, Verdict::Srd);
            let v = classify_memory(&Kernel::exponential(2.0, 0.5).unwrap(), alpha, false);
            assert_eq!(v.verdict, Verdict::Srd);
        }
    }

    #[test]
    fn log_corrected_tail_needs_the_conjecture() {
        // qα = 2 with βα = 1.5: outside L^{α/2}, but ∫ x m^α converges
        let alpha = 1.0;
        let t = TabulatedKernel::new(
            vec![0.0, 3.0],
            vec![1.0, 1.0],
            TailModel::Power {
                exponent: 2.0,
                log_exponent: 1.5,
            },
        )
        .unwrap();
        let k = Kernel::Tabulated(t);
        let v = classify_memory(&k, alpha, false);
        assert_eq!(v.verdict, Verdict::Indeterminate);
        assert!(v.rule.is_none());
        let v = classify_memory(&k, alpha, true);
        assert_eq!(v.verdict, Verdict::Lrd);
        assert!(v.conjectured);
        assert_eq!(v.rule, Some(Rule::AlphaHalfConjecture));
    }

    #[test]
    fn tail_moments_grow_for_long_memory() {
        let v = classify_memory(&power(1.0474), 1.56, false);
        let m2 = v.diagnostic("tail_moment_to_1e2").unwrap();
        let m6 = v.diagnostic("tail_moment_to_1e6").unwrap();
        assert!(m6 > 10.0 * m2);
    }

    #[test]
    fn verdict_is_scale_free() {
        for d in [1.0, 1.2, 1.5] {
            let k = Kernel::causal_series(0.0019, d).unwrap();
            let a = classify_memory(&k, 1.56, false);
            let b = classify_memory(&k.scaled(1e4), 1.56, false);
            assert_eq!(a.verdict, b.verdict);
            assert_eq!(a.rules(), b.rules());
        }
    }
}
