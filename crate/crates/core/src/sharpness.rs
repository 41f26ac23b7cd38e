//! The power-law family showing the integrability exponent cannot be raised,
//! and a probe that classifies truncated radial integrals as convergent or
//! divergent.

use serde::{Deserialize, Serialize};

use crate::distribution::{lebesgue_norm, least_squares, NormOutcome};
use crate::error::{Error, Result};
use crate::exponents::{ExponentContext, Regime};
use crate::profile::{log_grid, ProfileForm, RadialProfile};
use crate::quadrature::{integrate_log_radial, QuadratureConfig};
use crate::radial::{p_laplacian_residual, solve_radial};

/// Growth exponents of magnitude below this count as logarithmic.
pub const GROWTH_TOLERANCE: f64 = 0.01;
/// Required R² of the logarithmic fit.
pub const LOG_FIT_QUALITY: f64 = 0.999;
const FIT_POINTS: usize = 4;
const MIN_DELTAS: usize = 6;

/// Source `-r^{ℓ-n/q}` and its exact solution `c (r^s - 1)` for one `ε > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessExample {
    pub ctx: ExponentContext,
    pub epsilon: f64,
    pub ell_sharp: f64,
    pub f: RadialProfile,
    pub u: RadialProfile,
    pub u_exponent: f64,
    pub u_coefficient: f64,
    pub threshold: f64,
}

impl SharpnessExample {
    /// `‖f‖_q = (|S^{n-1}| / (ℓ q))^{1/q}`
    pub fn source_norm(&self) -> f64 {
        (self.ctx.sphere_area / (self.ell_sharp * self.ctx.q)).powf(1.0 / self.ctx.q)
    }
}

pub fn build_example(ctx: &ExponentContext, epsilon: f64) -> Result<SharpnessExample> {
    ctx.require(Regime::Subcritical)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", epsilon, "must be positive and finite"));
    }
    let (n, p, q) = (ctx.dim(), ctx.p, ctx.q);
    let gap = n / q - p;
    let ell = epsilon * gap * gap / ((p - 1.0) * n + epsilon * gap);
    let lq = ell * q;
    let u_exponent = (p * q - n + lq) / ((p - 1.0) * q);
    let u_coefficient = (p - 1.0) * q.powf(p / (p - 1.0)) / ((n * q - n + lq).powf(1.0 / (p - 1.0)) * (p * q - n + lq));
    let threshold = (p - 1.0) * q * n / (n - p * q - lq);

    let r_star = ctx.sharp_exponent.expect("subcritical context has a sharp exponent");
    let u = RadialProfile::power_law_affine(u_coefficient, u_exponent, -1.0);
    let checks = [
        (ell > 0.0 && lq > 0.0, "ell must be positive"),
        (
            ((threshold - r_star) - epsilon).abs() <= 1e-10 * threshold,
            "threshold must exceed the sharp exponent by epsilon",
        ),
        (u.boundary_value == 0.0, "u must vanish on the sphere"),
        (u_exponent < 0.0, "u must blow up at the origin"),
        (threshold.is_finite() && threshold > 0.0, "threshold must be finite"),
    ];
    if let Some((_, what)) = checks.iter().find(|(ok, _)| !ok) {
        return Err(Error::Numerics(format!("example construction failed: {what}")));
    }
    Ok(SharpnessExample {
        ctx: ctx.clone(),
        epsilon,
        ell_sharp: ell,
        f: RadialProfile::power(-1.0, ell - n / q),
        u,
        u_exponent,
        u_coefficient,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeCheck {
    /// Max relative p-Laplacian residual of the closed form on the radii.
    pub residual: f64,
    /// Max relative gap between the closed form and the quadrature solver at
    /// the solver nodes inside the radii's range.
    pub solver_gap: f64,
}

pub fn verify_example_pde(
    example: &SharpnessExample,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<PdeCheck> {
    verify_pair_pde(&example.u, example, radii, cfg)
}

/// As [`verify_example_pde`] with a caller-supplied candidate for `u`.
pub fn verify_pair_pde(
    u: &RadialProfile,
    example: &SharpnessExample,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<PdeCheck> {
    if let Some(bad) = radii.iter().find(|r| !(**r >= 1e-3 && **r <= 0.99)) {
        return Err(Error::OutsideWindow {
            radius: *bad,
            lower: 1e-3,
            upper: 0.99,
        });
    }
    let residual = p_laplacian_residual(u, &example.f, &example.ctx, radii)?;
    let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().copied().fold(0.0, f64::max);
    let solved = solve_radial(&example.f, &example.ctx, cfg, 1024)?;
    let nodes = solved.as_sampled().expect("solver output is sampled");
    let solver_gap = nodes
        .radii()
        .iter()
        .zip(nodes.values())
        .filter(|(r, _)| **r >= lo && **r <= hi)
        .map(|(&r, &v)| {
            let exact = u.value(r);
            (v - exact).abs() / exact.abs()
        })
        .fold(0.0, f64::max);
    Ok(PdeCheck { residual, solver_gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProbeClassification {
    Convergent,
    LogDivergent,
    PowerDivergent { gamma: f64 },
    Inconclusive,
}

impl ProbeClassification {
    pub fn is_divergent(&self) -> bool {
        matches!(self, Self::LogDivergent | Self::PowerDivergent { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub classification: ProbeClassification,
    /// Extrapolated exponent `γ` in `T(δ) ~ δ^{-γ}` (zero for logarithmic growth,
    /// negative when the truncations converge).
    pub gamma: f64,
    /// R² of `T` against `ln(1/δ)` over the last four deltas.
    pub log_r_squared: f64,
    /// R² of `ln T` against `ln(1/δ)` over the last four deltas.
    pub power_r_squared: f64,
    pub deltas: Vec<f64>,
    pub truncated: Vec<f64>,
    /// Geometric extrapolation of `T(δ → 0)` for convergent cases.
    pub limit_estimate: Option<f64>,
}

impl ProbeReport {
    pub fn best_r_squared(&self) -> f64 {
        self.log_r_squared.max(self.power_r_squared)
    }
}

/// Eight log-spaced deltas from `1e-2` to `1e-6`.
pub fn default_deltas() -> Vec<f64> {
    let mut d = log_grid(1e-6, 1e-2, 8);
    d.reverse();
    d
}

/// Deltas reaching deep enough that the subleading term of a power-affine
/// profile, relative size `δ^{|s|}`, has fallen below `1e-6`.
pub fn probe_deltas(u: &RadialProfile) -> Vec<f64> {
    match u.form {
        ProfileForm::PowerLawAffine { exponent, offset, .. } if exponent < 0.0 && offset != 0.0 => {
            let deepest = (1e-6f64.ln() / exponent.abs()).exp().clamp(1e-250, 1e-6);
            let mut d = log_grid(deepest, 1e-2, 8);
            d.reverse();
            d
        }
        _ => default_deltas(),
    }
}

fn check_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.len() < MIN_DELTAS {
        return Err(Error::InvalidInput(format!(
            "divergence probe needs at least {MIN_DELTAS} deltas, got {}",
            deltas.len()
        )));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && *d <= 0.1)) {
        return Err(Error::InvalidInput("deltas must lie in (0, 0.1]".into()));
    }
    let ratios: Vec<f64> = deltas.windows(2).map(|w| (w[0] / w[1]).ln()).collect();
    if ratios.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidInput("deltas must be strictly decreasing".into()));
    }
    if ratios.iter().any(|r| ((r - ratios[0]) / ratios[0]).abs() > 1e-6) {
        return Err(Error::InvalidInput("deltas must be log-spaced".into()));
    }
    Ok(())
}

/// Truncated integrals `T(δ) = |S^{n-1}| ∫_δ^1 |u|^r ρ^{n-1} dρ` and their
/// growth as `δ → 0`.
///
/// Consecutive increments of `T` over log-spaced deltas shrink by the factor
/// `(δ_{j+1}/δ_j)^{-γ}`; `γ` is read off their ratios and Aitken-extrapolated
/// over the last three estimates.
pub fn divergence_probe(
    u: &RadialProfile,
    r_exp: f64,
    ctx: &ExponentContext,
    deltas: &[f64],
    cfg: &QuadratureConfig,
) -> Result<ProbeReport> {
    check_deltas(deltas)?;
    if !(r_exp > 0.0 && r_exp.is_finite()) {
        return Err(Error::invalid("r_exp", r_exp, "must be positive and finite"));
    }
    let weight = ctx.dim() - 1.0;
    let g = |s: f64| u.value(s).abs().powf(r_exp) * s.powf(weight);
    let mut truncated = Vec::with_capacity(deltas.len());
    let mut increments = Vec::with_capacity(deltas.len() - 1);
    let mut running = ctx.sphere_area * integrate_log_radial(g, deltas[0], 1.0, cfg)?;
    truncated.push(running);
    for w in deltas.windows(2) {
        let piece = ctx.sphere_area * integrate_log_radial(g, w[1], w[0], cfg)?;
        increments.push(piece);
        running += piece;
        truncated.push(running);
    }

    let step = (deltas[0] / deltas[1]).ln();
    let ln_inv: Vec<f64> = deltas.iter().map(|d| -d.ln()).collect();
    let tail = deltas.len() - FIT_POINTS;
    let log_pts: Vec<(f64, f64)> = (tail..deltas.len()).map(|i| (ln_inv[i], truncated[i])).collect();
    let log_r_squared = least_squares(&log_pts).2;
    let power_r_squared = if truncated[tail..].iter().all(|t| *t > 0.0) {
        let pts: Vec<(f64, f64)> = (tail..deltas.len()).map(|i| (ln_inv[i], truncated[i].ln())).collect();
        least_squares(&pts).2
    } else {
        0.0
    };

    let last_total = *truncated.last().expect("nonempty");
    let negligible = increments
        .iter()
        .rev()
        .take(3)
        .all(|i| *i <= 1e-15 * last_total.abs() || *i == 0.0);
    let (classification, gamma, limit_estimate) = if negligible {
        (ProbeClassification::Convergent, f64::NEG_INFINITY, Some(last_total))
    } else {
        let rates: Vec<f64> = increments.windows(2).map(|w| (w[1] / w[0]).ln() / step).collect();
        let gamma = aitken(&rates);
        let classification = if !gamma.is_finite() {
            ProbeClassification::Inconclusive
        } else if gamma > GROWTH_TOLERANCE {
            ProbeClassification::PowerDivergent { gamma }
        } else if gamma >= -GROWTH_TOLERANCE {
            if log_r_squared >= LOG_FIT_QUALITY {
                ProbeClassification::LogDivergent
            } else {
                ProbeClassification::Inconclusive
            }
        } else {
            ProbeClassification::Convergent
        };
        let limit = matches!(classification, ProbeClassification::Convergent).then(|| {
            // remove the dominant geometric mode exactly, then Aitken the rest
            let ratio = (gamma * step).exp();
            let reduced: Vec<f64> = truncated
                .windows(2)
                .map(|w| (w[1] - ratio * w[0]) / (1.0 - ratio))
                .collect();
            aitken(&reduced)
        });
        (classification, gamma, limit)
    };
    Ok(ProbeReport {
        classification,
        gamma,
        log_r_squared,
        power_r_squared,
        deltas: deltas.to_vec(),
        truncated,
        limit_estimate,
    })
}

/// Aitken's Δ² on the last three terms, used only when they approach their
/// limit monotonically and geometrically.
fn aitken(seq: &[f64]) -> f64 {
    match seq {
        [.., a, b, c] => {
            let (d1, d2) = (b - a, c - b);
            let ratio = d2 / d1;
            if d1 != 0.0 && ratio > 0.0 && ratio < 1.0 {
                c + d2 * ratio / (1.0 - ratio)
            } else {
                *c
            }
        }
        [.., c] => *c,
        [] => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r_exp: f64,
    pub classification: ProbeClassification,
    pub finite: bool,
    /// `‖u‖_r` when finite.
    pub norm: Option<f64>,
    /// `‖u‖_r / ‖f‖_q^{1/(p-1)}` when finite.
    pub bound_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub threshold: f64,
    pub sharp_exponent: f64,
    pub rows: Vec<SweepRow>,
    /// Smallest exponent on the grid classified as divergent.
    pub empirical_cutoff: Option<f64>,
    /// Distance from the cutoff to the largest finite exponent below it.
    pub resolution: Option<f64>,
    pub within_resolution: bool,
}

/// Probes `‖u‖_r` of the example over `r_grid` and locates the switch from
/// finite to infinite.
pub fn exponent_sweep(
    ctx: &ExponentContext,
    epsilon: f64,
    r_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<SweepTable> {
    let example = build_example(ctx, epsilon)?;
    let deltas = probe_deltas(&example.u);
    let f_scale = example.source_norm().powf(1.0 / (ctx.p - 1.0));
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r_exp in r_grid {
        let report = divergence_probe(&example.u, r_exp, ctx, &deltas, cfg)?;
        let norm = match report.classification {
            ProbeClassification::Convergent if r_exp >= 1.0 => match lebesgue_norm(&example.u, r_exp, ctx, cfg)? {
                NormOutcome::Finite { value } => Some(value),
                NormOutcome::Diverged { .. } => None,
            },
            _ => None,
        };
        rows.push(SweepRow {
            r_exp,
            classification: report.classification,
            finite: report.classification == ProbeClassification::Convergent,
            norm,
            bound_ratio: norm.map(|v| v / f_scale),
        });
    }
    let empirical_cutoff = rows
        .iter()
        .filter(|r| r.classification.is_divergent())
        .map(|r| r.r_exp)
        .reduce(f64::min);
    let resolution = empirical_cutoff.and_then(|c| {
        rows.iter()
            .filter(|r| r.finite && r.r_exp < c)
            .map(|r| c - r.r_exp)
            .reduce(f64::min)
    });
    let within_resolution = match (empirical_cutoff, resolution) {
        (Some(c), Some(d)) => (c - example.threshold).abs() <= d + 1e-12 * c,
        _ => false,
    };
    Ok(SweepTable {
        threshold: example.threshold,
        sharp_exponent: ctx.sharp_exponent.unwrap_or(f64::NAN),
        rows,
        empirical_cutoff,
        resolution,
        within_resolution,
    })
}

/// `(n/p + 1)/2`, a subcritical source exponent for the sweep contexts.
pub fn sweep_source_exponent(n: u32, p: f64) -> f64 {
    (f64::from(n) / p + 1.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::validate_context;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> SharpnessExample {
        build_example(&validate_context(3, 2.0, 1.2).unwrap(), 1.0).unwrap()
    }

    fn check_radii() -> Vec<f64> {
        log_grid(0.01, 0.99, 200)
    }

    #[test]
    fn reference_example_arithmetic() {
        let ex = reference();
        assert_relative_eq!(ex.ell_sharp, 1.0 / 14.0, max_relative = 1e-14);
        assert_relative_eq!(ex.threshold, 7.0, max_relative = 1e-13);
        assert_relative_eq!(ex.u_exponent, -3.0 / 7.0, max_relative = 1e-13);
        assert_eq!(ex.u.value(1.0), 0.0);
        // independent route: pure power source solution
        let alt = crate::radial::power_source_solution(-1.0, ex.ell_sharp - 2.5, &ex.ctx).unwrap();
        for r in [0.01, 0.3, 0.9] {
            assert_relative_eq!(alt.value(r), ex.u.value(r), max_relative = 1e-12);
        }
        // |u|^threshold r^{n-1} ~ c r^{-1} near the origin
        let g = |r: f64| ex.u.value(r).abs().powf(ex.threshold) * r * r;
        assert_relative_eq!(g(1e-30) * 1e-30, g(1e-31) * 1e-31, max_relative = 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        let crit = validate_context(3, 2.0, 1.5).unwrap();
        assert!(matches!(build_example(&crit, 1.0), Err(Error::RegimeMismatch { .. })));
        let sub = validate_context(3, 2.0, 1.2).unwrap();
        assert!(build_example(&sub, 0.0).is_err());
        assert!(build_example(&sub, -1.0).is_err());
    }

    #[test]
    fn ell_increases_in_epsilon() {
        let ctx = validate_context(4, 2.5, 1.3).unwrap();
        let ells: Vec<f64> = (1..60)
            .map(|i| build_example(&ctx, 1e-4 * 1.3f64.powi(i)).unwrap().ell_sharp)
            .collect();
        assert!(ells.windows(2).all(|w| w[1] > w[0]));
        assert!(ells[0] < 1e-4);
    }

    #[test]
    fn source_norm_matches_quadrature() {
        let ex = reference();
        let cfg = QuadratureConfig::default();
        let v = lebesgue_norm(&ex.f, ex.ctx.q, &ex.ctx, &cfg).unwrap().finite().unwrap();
        assert_relative_eq!(v, ex.source_norm(), max_relative = 1e-8);
    }

    #[test]
    fn reference_pde_checks() {
        let ex = reference();
        let cfg = QuadratureConfig::default();
        let check = verify_example_pde(&ex, &check_radii(), &cfg).unwrap();
        assert!(check.residual <= 1e-6, "{check:?}");
        assert!(check.solver_gap <= 1e-6, "{check:?}");
    }

    #[test]
    fn p3_instance() {
        let ex = build_example(&validate_context(4, 3.0, 1.1).unwrap(), 0.5).unwrap();
        let check = verify_example_pde(&ex, &check_radii(), &QuadratureConfig::default()).unwrap();
        assert!(check.residual <= 1e-6 && check.solver_gap <= 1e-6, "{check:?}");
    }

    #[test]
    fn perturbed_exponent_is_detected() {
        let ex = reference();
        let bad = RadialProfile::power_law_affine(ex.u_coefficient, ex.u_exponent * 1.01, -1.0);
        let check = verify_pair_pde(&bad, &ex, &check_radii(), &QuadratureConfig::default()).unwrap();
        assert!(check.residual > 1e-2);
    }

    #[test]
    fn probe_at_threshold_is_logarithmic() {
        let ex = reference();
        let cfg = QuadratureConfig::default();
        let rep = divergence_probe(&ex.u, ex.threshold, &ex.ctx, &default_deltas(), &cfg).unwrap();
        assert_eq!(rep.classification, ProbeClassification::LogDivergent, "{rep:?}");
        assert!(rep.log_r_squared >= 0.999);
        assert!(rep.truncated.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn probe_below_threshold_converges_to_beta_integral() {
        let ex = reference();
        let cfg = QuadratureConfig::default();
        let r = ex.threshold - 0.5;
        let rep = divergence_probe(&ex.u, r, &ex.ctx, &default_deltas(), &cfg).unwrap();
        assert_eq!(rep.classification, ProbeClassification::Convergent);
        // |S| |c|^R ∫_0^1 (r^s - 1)^R r^2 dr = |S| |c|^R B((sR+3)/|s|, R+1) / |s|
        let s = ex.u_exponent.abs();
        let a = (3.0 - s * r) / s;
        let ln_beta = statrs::function::beta::ln_beta(a, r + 1.0);
        let exact = ex.ctx.sphere_area * ex.u_coefficient.abs().powf(r) * ln_beta.exp() / s;
        assert_relative_eq!(rep.limit_estimate.unwrap(), exact, max_relative = 5e-4);
    }

    #[test]
    fn probe_on_constant_and_power_growth() {
        let ctx = validate_context(3, 2.0, 1.2).unwrap();
        let cfg = QuadratureConfig::default();
        let rep = divergence_probe(&RadialProfile::constant(1.0), 3.0, &ctx, &default_deltas(), &cfg).unwrap();
        assert_eq!(rep.classification, ProbeClassification::Convergent);
        let rep = divergence_probe(&RadialProfile::power(1.0, -1.0), 4.0, &ctx, &default_deltas(), &cfg).unwrap();
        match rep.classification {
            ProbeClassification::PowerDivergent { gamma } => assert_relative_eq!(gamma, 1.0, max_relative = 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn probe_rejects_bad_deltas() {
        let ctx = validate_context(3, 2.0, 1.2).unwrap();
        let cfg = QuadratureConfig::default();
        let u = RadialProfile::constant(1.0);
        assert!(divergence_probe(&u, 2.0, &ctx, &[1e-2, 1e-3, 1e-4], &cfg).is_err());
        assert!(divergence_probe(&u, 2.0, &ctx, &[1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8], &cfg).is_err());
        assert!(divergence_probe(&u, 2.0, &ctx, &[0.5, 0.05, 5e-3, 5e-4, 5e-5, 5e-6], &cfg).is_err());
    }

    #[test]
    fn reference_sweep() {
        let ctx = validate_context(3, 2.0, 1.2).unwrap();
        let cfg = QuadratureConfig::default();
        let t = exponent_sweep(&ctx, 1.0, &[5.0, 6.0, 6.5, 6.9, 7.0, 7.5], &cfg).unwrap();
        let finite: Vec<bool> = t.rows.iter().map(|r| r.finite).collect();
        assert_eq!(finite, [true, true, true, true, false, false]);
        assert_eq!(t.empirical_cutoff, Some(7.0));
        assert!(t.within_resolution);
        assert!(t.rows[..4].iter().all(|r| r.bound_ratio.unwrap() > 0.0));
        assert!(exponent_sweep(&ctx, 1.0, &[], &cfg).unwrap().rows.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn threshold_exceeds_sharp_exponent_by_epsilon(
            n in 3u32..8,
            pf in 0.05f64..0.95,
            qf in 0.02f64..0.98,
            eps in 0.01f64..10.0,
        ) {
            let nf = f64::from(n);
            let p = 1.0 + pf * (nf - 1.0);
            let q = 1.0 + qf * (nf / p - 1.0);
            prop_assume!(q > 1.0 + 1e-9 && q < nf / p * (1.0 - 1e-9) && p < nf);
            let ctx = validate_context(n, p, q).unwrap();
            let ex = build_example(&ctx, eps).unwrap();
            let r_star = ctx.sharp_exponent.unwrap();
            prop_assert!(((ex.threshold - r_star) - eps).abs() <= 1e-10 * ex.threshold);
        }
    }
}
