//! Short/long range dependence in the excursion sense: integrated
//! covariances of level-crossing indicators, the kernel classifier and the
//! auxiliary inequalities behind it.

mod inequalities;
mod classify;
mod excursion;
mod montecarlo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use inequalities::{
    elementary_inequalities, c_alpha, c_alpha_lower_bound, char_deviation_bound, overlap_integral,
    overlap_integral_2d, DeviationBound, InequalityReport,
};
pub use classify::classify_memory;
pub use excursion::{excursion_cov_integrated, ExcursionConfig, ExcursionResult};
pub use montecarlo::{discretize_pair, mc_excursion_cov, McConfig, McEstimate};

/// A finite measure made of weighted point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("a measure needs at least one atom"));
        }
        for &(u, w) in &atoms {
            if !u.is_finite() || !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!(
                    "atom ({u}, {w}) needs a finite location and positive weight"
                )));
            }
        }
        Ok(Self { atoms })
    }

    pub fn dirac(u: f64) -> Self {
        Self {
            atoms: vec![(u, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Fourier transform `ψ(s) = Σ w_k e^{i s u_k}` as `(Re, Im)`.
    pub fn fourier(&self, s: f64) -> (f64, f64) {
        self.atoms.iter().fold((0.0, 0.0), |(re, im), &(u, w)| {
            let (sin, cos) = (s * u).sin_cos();
            (re + w * cos, im + w * sin)
        })
    }

    pub fn has_imaginary_part(&self) -> bool {
        self.atoms.iter().any(|a| a.0 != 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Srd,
    Lrd,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Srd => "SRD",
            Verdict::Lrd => "LRD",
            Verdict::Indeterminate => "Indeterminate",
        })
    }
}

/// The criterion that settled a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `m ∈ L^{α/2}`, equivalently `ρ_t` integrable: SRD.
    AlphaHalfIntegrability,
    /// `∫∫ min(m^α(x), m^α(t)) dx dt = ∞`: LRD.
    MinimumOverlapDivergence,
    /// Eventually monotone kernel with `∫ t m^α(t) dt = ∞`: LRD.
    EventuallyMonotoneMoment,
    /// Power-law tail `|x|^{-δ}` with `1/α < δ ≤ 2/α`: LRD, `δ > 2/α`: SRD.
    PowerLawThreshold,
    /// Max-stable: LRD iff `∫ (2 - θ_t) dt = ∞`.
    ExtremalCoefficientIntegral,
    /// Conjectured equivalence of LRD with `m ∉ L^{α/2}`; not a theorem.
    AlphaHalfConjecture,
}

impl Rule {
    pub fn describe(&self) -> &'static str {
        match self {
            Rule::AlphaHalfIntegrability => "kernel in L^(alpha/2) (spectral covariance integrable)",
            Rule::MinimumOverlapDivergence => "double integral of min(m^alpha(x), m^alpha(t)) diverges",
            Rule::EventuallyMonotoneMoment => "eventually monotone kernel with divergent tail moment of t m^alpha(t)",
            Rule::PowerLawThreshold => "power-law tail threshold delta <= 2/alpha",
            Rule::ExtremalCoefficientIntegral => "integral of (2 - theta_t) over the lags",
            Rule::AlphaHalfConjecture => "conjecture: LRD iff kernel not in L^(alpha/2)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: f64,
}

/// Outcome of a memory classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryVerdict {
    pub verdict: Verdict,
    /// First rule, in decision order, that settled the verdict.
    pub rule: Option<Rule>,
    /// Further rules that reach the same verdict.
    pub supporting: Vec<Rule>,
    pub diagnostics: Vec<Diagnostic>,
    /// Set only when the verdict rests on [`Rule::AlphaHalfConjecture`].
    pub conjectured: bool,
    pub note: String,
}

impl MemoryVerdict {
    pub(crate) fn decided(verdict: Verdict, rule: Rule, supporting: Vec<Rule>) -> Self {
        Self {
            verdict,
            rule: Some(rule),
            supporting,
            diagnostics: Vec::new(),
            conjectured: false,
            note: String::new(),
        }
    }

    pub(crate) fn indeterminate(note: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::Indeterminate,
            rule: None,
            supporting: Vec::new(),
            diagnostics: Vec::new(),
            conjectured: false,
            note: note.into(),
        }
    }

    pub(crate) fn with(mut self, name: &str, value: f64) -> Self {
        self.diagnostics.push(Diagnostic {
            name: name.to_string(),
            value,
        });
        self
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|d| d.name == name).map(|d| d.value)
    }

    /// All rules backing the verdict, primary first.
    pub fn rules(&self) -> Vec<Rule> {
        self.rule.into_iter().chain(self.supporting.iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_of_dirac_at_zero_is_real() {
        let m = DiscreteMeasure::dirac(0.0);
        assert_eq!(m.fourier(3.0), (1.0, 0.0));
        assert!(!m.has_imaginary_part());
    }

    #[test]
    fn fourier_of_mixture() {
        let m = DiscreteMeasure::new(vec![(1.0, 0.5), (-2.0, 2.0)]).unwrap();
        let (re, im) = m.fourier(0.3);
        assert!((re - (0.5 * 0.3f64.cos() + 2.0 * 0.6f64.cos())).abs() < 1e-15);
        assert!((im - (0.5 * 0.3f64.sin() - 2.0 * 0.6f64.sin())).abs() < 1e-15);
        assert_eq!(m.total_weight(), 2.5);
    }

    #[test]
    fn rejects_empty_or_negative_measures() {
        assert!(DiscreteMeasure::new(vec![]).is_err());
        assert!(DiscreteMeasure::new(vec![(0.0, -1.0)]).is_err());
    }
}
