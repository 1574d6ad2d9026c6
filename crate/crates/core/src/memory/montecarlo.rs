use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{power_series_sum, Kernel};
use crate::quad::{self, QuadConfig};
use crate::rng::{stream, MC_STREAM_BASE};
use crate::stable::{check_alpha, standard_sas};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Cell width of the kernel grid near the support (relative width in
    /// the tails).
    pub grid: f64,
    /// Number of angular bins over `[0, π/2]` used to merge cells.
    pub angle_bins: usize,
    pub batch_size: usize,
    /// Rerun at half the grid width and report the drift.
    pub refinement_check: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            grid: 1e-3,
            angle_bins: 64,
            batch_size: 1 << 16,
            refinement_check: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_err: f64,
    pub n_paths: usize,
    /// Number of independent innovations per path after merging.
    pub atoms: usize,
    /// `|estimate(h) - estimate(h/2)|` with common random numbers.
    pub refinement_drift: Option<f64>,
}

/// Relative mass left out of the explicit cells before the remaining tail
/// is lumped into one atom.
const TAIL_TARGET: f64 = 1e-10;
/// Cells never extend past this distance from the core.
const FAR_LIMIT: f64 = 1e12;

/// `∫_a^b m(x)^p dx`.
fn cell_mass(kernel: &Kernel, p: f64, a: f64, b: f64) -> Result<f64> {
    let (lo, hi) = kernel.support();
    let (a, b) = (a.max(lo), b.min(hi));
    if a >= b {
        return Ok(0.0);
    }
    match kernel {
        Kernel::Exponential { c, rate } => {
            let r = rate * p;
            Ok(c.powf(p) / r * ((-r * a).exp() - (-r * b).exp()))
        }
        Kernel::StepCoefficients {
            coeffs,
            first_index,
            width,
        } => {
            let mut total = 0.0;
            for (i, a_j) in coeffs.iter().enumerate() {
                let left = (first_index - 1 + i as i64) as f64 * width;
                let overlap = (b.min(left + width) - a.max(left)).max(0.0);
                total += a_j.powf(p) * overlap;
            }
            Ok(total)
        }
        Kernel::CausalSeries { c, delta } => {
            // m = c (1 + k^δ)^{-1} on [k - 1, k)
            let term = |k: i64| (1.0 + (k as f64).powf(*delta)).powf(-p);
            let k_a = a.floor() as i64 + 1;
            let k_b = b.ceil() as i64;
            if k_a == k_b {
                return Ok(c.powf(p) * term(k_a) * (b - a));
            }
            let ends = term(k_a) * (k_a as f64 - a) + term(k_b) * (b - (k_b - 1) as f64);
            let inner = if k_b - k_a - 1 <= 4096 {
                (k_a + 1..k_b).map(term).sum::<f64>()
            } else {
                power_series_sum(*delta, p, k_a + 1) - power_series_sum(*delta, p, k_b)
            };
            Ok(c.powf(p) * (ends + inner))
        }
        Kernel::PowerLaw { .. } | Kernel::Tabulated(_) => {
            let mut pts = vec![a, b];
            pts.extend(kernel.breakpoints().into_iter().filter(|x| *x > a && *x < b));
            pts.sort_by(f64::total_cmp);
            let r = quad::integrate_points(|x| kernel.value(x).powf(p), &pts, &QuadConfig::with_tol(0.0, 1e-10))?;
            Ok(r.value)
        }
    }
}

/// Cell boundaries on the `y` axis covering the supports of `m(y)` and
/// `m(y + t)`, plus the lumped remainder of each infinite tail as
/// `(mass of m(y)^α, mass of m(y + t)^α)`.
fn cells(kernel: &Kernel, alpha: f64, t: f64, h: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    let (lo, hi) = kernel.support();
    let mut pts: Vec<f64> = kernel
        .breakpoints()
        .into_iter()
        .chain([kernel.finite_core_start(), kernel.finite_core_end()])
        .filter(|x| x.is_finite())
        .flat_map(|x| [x, x - t])
        .collect();
    pts.sort_by(f64::total_cmp);
    let (l, r) = (pts[0], pts[pts.len() - 1]);
    let n_core = ((r - l) / h).ceil() as usize;
    let mut bounds: Vec<f64> = (0..=n_core).map(|i| (l + i as f64 * h).min(r)).collect();
    bounds.extend(pts);
    bounds.sort_by(f64::total_cmp);
    bounds.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * h);

    let norm = kernel.alpha_norm(alpha).value;
    let mut lumps = Vec::new();
    if hi == f64::INFINITY {
        let mut x = r;
        let mut right = Vec::new();
        while x - r < FAR_LIMIT
            && kernel.tail_mass(alpha, x, true).max(kernel.tail_mass(alpha, x + t, true)) > TAIL_TARGET * norm
        {
            x += h * (x - r).max(1.0);
            right.push(x);
        }
        lumps.push((kernel.tail_mass(alpha, x, true), kernel.tail_mass(alpha, x + t, true)));
        bounds.extend(right);
    }
    if lo == f64::NEG_INFINITY {
        let mut x = l;
        let mut left = Vec::new();
        while l - x < FAR_LIMIT
            && kernel.tail_mass(alpha, x, false).max(kernel.tail_mass(alpha, x + t, false)) > TAIL_TARGET * norm
        {
            x -= h * (l - x).max(1.0);
            left.push(x);
        }
        lumps.push((kernel.tail_mass(alpha, x, false), kernel.tail_mass(alpha, x + t, false)));
        bounds.extend(left);
        bounds.sort_by(f64::total_cmp);
    }
    (bounds, lumps)
}

/// Finite representation `(X(0), X(t)) ≈ Σ_j Z_j (a_j, b_j)` with i.i.d.
/// standard SαS `Z_j`.
///
/// The `y`-axis is cut into cells; each cell contributes the vector of the
/// exact cell α-masses `((∫ m(y)^α)^{1/α}, (∫ m(y + t)^α)^{1/α})`. Cells
/// are then merged by direction: vectors in the same angular bin are
/// replaced by one vector carrying their summed α-th powers in each
/// coordinate. Both marginals stay exact and the joint law changes only by
/// the spread of directions inside a bin.
pub fn discretize_pair(kernel: &Kernel, alpha: f64, t: f64, cfg: &McConfig) -> Result<Vec<(f64, f64)>> {
    check_alpha(alpha)?;
    if !(cfg.grid > 0.0 && cfg.grid <= 0.5) {
        return Err(Error::invalid(format!("grid width must lie in (0, 0.5], got {}", cfg.grid)));
    }
    if cfg.angle_bins < 4 {
        return Err(Error::invalid("at least 4 angular bins are needed"));
    }
    if !t.is_finite() {
        return Err(Error::invalid(format!("lag must be finite, got {t}")));
    }
    kernel.validate()?;
    let norm = kernel.alpha_norm(alpha);
    if !norm.is_finite() {
        return Err(Error::Divergent(norm.divergence.unwrap_or_default()));
    }

    let (bounds, lumps) = cells(kernel, alpha, t, cfg.grid);
    let mut masses = lumps;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        masses.push((cell_mass(kernel, alpha, a, b)?, cell_mass(kernel, alpha, a + t, b + t)?));
    }

    let bins = cfg.angle_bins;
    let mut merged = vec![(0.0, 0.0); bins];
    for (ma, mb) in masses {
        if ma <= 0.0 && mb <= 0.0 {
            continue;
        }
        // angle of (ma^{1/α}, mb^{1/α})
        let theta = (mb / ma).powf(1.0 / alpha).atan();
        let k = ((theta / FRAC_PI_2 * bins as f64) as usize).min(bins - 1);
        merged[k].0 += ma;
        merged[k].1 += mb;
    }
    Ok(merged
        .into_iter()
        .filter(|(a, b)| *a > 0.0 || *b > 0.0)
        .map(|(a, b)| (a.powf(1.0 / alpha), b.powf(1.0 / alpha)))
        .collect())
}

/// Monte Carlo estimate of `Cov(1{X(0) > u}, 1{X(t) > v})`.
///
/// Paths are drawn in fixed batches, batch `b` using stream
/// `MC_STREAM_BASE | b`, so the estimate does not depend on the number of
/// threads. The estimator is the unbiased sample covariance of the two
/// indicators; its standard error comes from the influence function.
#[allow(clippy::too_many_arguments)]
pub fn mc_excursion_cov(
    t: f64,
    kernel: &Kernel,
    alpha: f64,
    u: f64,
    v: f64,
    n_paths: usize,
    seed: u64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if n_paths < 2 {
        return Err(Error::invalid("need at least two paths"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let atoms = discretize_pair(kernel, alpha, t, cfg)?;
    let mut est = run(&atoms, alpha, u, v, n_paths, seed, cfg.batch_size);
    if cfg.refinement_check {
        let fine = McConfig {
            grid: cfg.grid / 2.0,
            angle_bins: cfg.angle_bins * 2,
            refinement_check: false,
            ..*cfg
        };
        let atoms = discretize_pair(kernel, alpha, t, &fine)?;
        let other = run(&atoms, alpha, u, v, n_paths, seed, cfg.batch_size);
        est.refinement_drift = Some((est.estimate - other.estimate).abs());
    }
    Ok(est)
}

fn run(atoms: &[(f64, f64)], alpha: f64, u: f64, v: f64, n: usize, seed: u64, batch: usize) -> McEstimate {
    let n_batches = n.div_ceil(batch);
    let counts: Vec<[u64; 4]> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, MC_STREAM_BASE | b as u64);
            let size = batch.min(n - b * batch);
            let mut c = [0u64; 4];
            for _ in 0..size {
                let (mut x0, mut xt) = (0.0, 0.0);
                for &(a, bb) in atoms {
                    let z = standard_sas(&mut rng, alpha);
                    x0 += a * z;
                    xt += bb * z;
                }
                c[((x0 > u) as usize) << 1 | (xt > v) as usize] += 1;
            }
            c
        })
        .collect();
    let mut c = [0u64; 4];
    for k in counts {
        for i in 0..4 {
            c[i] += k[i];
        }
    }
    let nf = n as f64;
    let p11 = c[3] as f64 / nf;
    let pa = (c[2] + c[3]) as f64 / nf;
    let pb = (c[1] + c[3]) as f64 / nf;
    let cov = p11 - pa * pb;
    let mut var = 0.0;
    for (idx, &count) in c.iter().enumerate() {
        let ia = (idx >> 1) as f64;
        let ib = (idx & 1) as f64;
        let infl = (ia - pa) * (ib - pb) - cov;
        var += count as f64 * infl * infl;
    }
    var /= nf;
    McEstimate {
        estimate: cov * nf / (nf - 1.0),
        std_err: (var / nf).sqrt(),
        n_paths: n,
        atoms: atoms.len(),
        refinement_drift: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merged_atoms_preserve_marginal_scales() {
        let alpha = 1.3;
        for k in [
            Kernel::exponential(1.0, 1.0).unwrap(),
            Kernel::power_law(1.0, 1.2, 0.5, true).unwrap(),
            Kernel::causal_series(0.5, 1.1).unwrap(),
            Kernel::steps(vec![1.0, 0.5, 0.25], 1, 0.5).unwrap(),
        ] {
            let atoms = discretize_pair(&k, alpha, 1.5, &McConfig::default()).unwrap();
            let n = k.alpha_norm(alpha).value;
            let sa: f64 = atoms.iter().map(|a| a.0.abs().powf(alpha)).sum();
            let sb: f64 = atoms.iter().map(|a| a.1.abs().powf(alpha)).sum();
            assert!((sa / n - 1.0).abs() < 1e-8, "{k:?}: {sa} vs {n}");
            assert!((sb / n - 1.0).abs() < 1e-8, "{k:?}: {sb} vs {n}");
        }
    }

    #[test]
    fn exponential_kernel_needs_two_directions() {
        let k = Kernel::exponential(1.0, 1.0).unwrap();
        let atoms = discretize_pair(&k, 1.0, 1.0, &McConfig::default()).unwrap();
        assert_eq!(atoms.len(), 2);
    }

    #[test]
    fn disjoint_supports_are_independent() {
        let k = Kernel::indicator_unit();
        let atoms = discretize_pair(&k, 1.0, 3.0, &McConfig::default()).unwrap();
        assert!(atoms.iter().all(|(a, b)| *a == 0.0 || *b == 0.0));
    }

    #[test]
    fn rejects_degenerate_grid() {
        let k = Kernel::indicator_unit();
        let cfg = McConfig {
            grid: 0.0,
            ..McConfig::default()
        };
        assert!(mc_excursion_cov(1.0, &k, 1.0, 0.0, 0.0, 100, 1, &cfg).is_err());
    }

    #[test]
    fn estimate_does_not_depend_on_thread_count() {
        let k = Kernel::exponential(1.0, 1.0).unwrap();
        let cfg = McConfig {
            batch_size: 1000,
            ..McConfig::default()
        };
        let a = mc_excursion_cov(1.0, &k, 1.5, 0.0, 0.0, 20_000, 5, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| mc_excursion_cov(1.0, &k, 1.5, 0.0, 0.0, 20_000, 5, &cfg).unwrap());
        assert_eq!(a, b);
    }
}
