//! Radial solutions of `-div(|∇u|^{p-2}∇u) = f` on the unit ball with `u = 0`
//! on the sphere.
//!
//! For radial data the equation integrates once to the flux identity
//! `r^{n-1} φ(u'(r)) = -F(r)` with `F(r) = ∫_0^r f(s) s^{n-1} ds` and
//! `φ(t) = |t|^{p-2} t`, so
//!
//! ```text
//! u'(r) = φ^{-1}(-F(r) / r^{n-1}),    u(r) = -∫_r^1 u'(t) dt.
//! ```

use crate::error::{Error, Result};
use crate::exponents::ExponentContext;
use crate::profile::{log_grid, ProfileForm, RadialProfile, MIN_SAMPLED_NODES};
use crate::quadrature::{integrate, integrate_log_radial, power_affine_tail, power_tail, QuadratureConfig};

/// Admissible radii for the residual check.
pub const RESIDUAL_WINDOW: (f64, f64) = (1e-7, 0.99);

/// Relative step of the central difference used on the flux.
const FLUX_STEP: f64 = 1e-5;

fn check_finite(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, x, "must be finite"))
    }
}

/// The scalar flux map `φ(t) = |t|^{p-2} t`.
pub fn phi(t: f64, p: f64) -> Result<f64> {
    check_finite("t", t)?;
    check_finite("p", p)?;
    Ok(phi_unchecked(t, p))
}

/// `φ^{-1}(s) = |s|^{(2-p)/(p-1)} s`.
pub fn phi_inverse(s: f64, p: f64) -> Result<f64> {
    check_finite("s", s)?;
    check_finite("p", p)?;
    Ok(phi_inverse_unchecked(s, p))
}

#[inline]
pub(crate) fn phi_unchecked(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(p - 1.0)
    }
}

#[inline]
pub(crate) fn phi_inverse_unchecked(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(1.0 / (p - 1.0))
    }
}

/// Exponent governing `f` at the origin, and the integrability check against
/// `s^{n-1}`.
fn source_origin_exponent(f: &RadialProfile, cutoff: f64) -> f64 {
    match &f.form {
        ProfileForm::PowerLawAffine {
            coefficient,
            exponent,
            offset,
        } => {
            if *coefficient == 0.0 {
                0.0
            } else if *offset == 0.0 || *exponent < 0.0 {
                *exponent
            } else {
                0.0
            }
        }
        ProfileForm::Sampled(_) => {
            let v = f.value(cutoff);
            if v == 0.0 {
                0.0
            } else {
                cutoff * f.derivative(cutoff) / v
            }
        }
    }
}

fn check_integrable(f: &RadialProfile, ctx: &ExponentContext, cutoff: f64) -> Result<()> {
    let kappa = source_origin_exponent(f, cutoff);
    let bound = -ctx.dim();
    if kappa > bound {
        Ok(())
    } else {
        Err(Error::NonIntegrableSource {
            exponent: kappa,
            bound,
        })
    }
}

/// `F(r) = ∫_0^r f(s) s^{n-1} ds`. Power-affine sources use their
/// antiderivative; sampled sources go through [`cumulative_source_quadrature`].
pub fn cumulative_source(
    f: &RadialProfile,
    r: f64,
    ctx: &ExponentContext,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::invalid("r", r, "must lie in (0, 1]"));
    }
    check_integrable(f, ctx, cfg.origin_cutoff)?;
    match &f.form {
        ProfileForm::PowerLawAffine {
            coefficient,
            exponent,
            offset,
        } => Ok(power_affine_antiderivative(*coefficient, *exponent, *offset, r, ctx.dim())),
        ProfileForm::Sampled(_) => cumulative_source_quadrature(f, r, ctx, cfg),
    }
}

fn power_affine_antiderivative(a: f64, s: f64, k: f64, r: f64, n: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let mut total = r.powf(s + n) / (s + n);
    if k != 0.0 {
        total += k * r.powf(n) / n;
    }
    a * total
}

/// `F(r)` by adaptive quadrature on `[cutoff, r]` plus a power-law model on
/// `[0, cutoff]`, regardless of the profile's form.
pub fn cumulative_source_quadrature(
    f: &RadialProfile,
    r: f64,
    ctx: &ExponentContext,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_integrable(f, ctx, cfg.origin_cutoff)?;
    let weight = ctx.dim() - 1.0;
    let cutoff = cfg.origin_cutoff.min(r);
    let tail = source_tail(f, weight, cutoff)?;
    let body = integrate_log_radial(|s| f.value(s) * s.powf(weight), cutoff, r, cfg)?;
    Ok(tail + body)
}

/// `∫_0^c f(s) s^{m} ds` from the profile's behaviour at the origin.
fn source_tail(f: &RadialProfile, weight: f64, c: f64) -> Result<f64> {
    let tail = match &f.form {
        ProfileForm::PowerLawAffine {
            coefficient,
            exponent,
            offset,
        } => power_affine_tail(*coefficient, *exponent, *offset, 1.0, weight, c)
            .map(|t| t * f.value(c).signum()),
        ProfileForm::Sampled(_) => {
            let slope = source_origin_exponent(f, c);
            power_tail(f.value(c) * c.powf(weight), c, slope + weight)
        }
    };
    tail.ok_or(Error::NonIntegrableSource {
        exponent: source_origin_exponent(f, c),
        bound: -(weight + 1.0),
    })
}

/// Radial solution on a log-spaced grid of `grid_size` nodes from the origin
/// cutoff to 1.
pub fn solve_radial(
    f: &RadialProfile,
    ctx: &ExponentContext,
    cfg: &QuadratureConfig,
    grid_size: usize,
) -> Result<RadialProfile> {
    if grid_size < MIN_SAMPLED_NODES {
        return Err(Error::InvalidInput(format!(
            "grid_size must be at least {MIN_SAMPLED_NODES}, got {grid_size}"
        )));
    }
    cfg.validate()?;
    solve_radial_on(f, ctx, cfg, log_grid(cfg.origin_cutoff, 1.0, grid_size))
}

/// Radial solution on caller-chosen radii. The grid must end at 1 and may not
/// reach below the origin cutoff.
pub fn solve_radial_on(
    f: &RadialProfile,
    ctx: &ExponentContext,
    cfg: &QuadratureConfig,
    radii: Vec<f64>,
) -> Result<RadialProfile> {
    cfg.validate()?;
    if let Some(&r0) = radii.first() {
        if r0 < cfg.origin_cutoff {
            return Err(Error::OutsideWindow {
                radius: r0,
                lower: cfg.origin_cutoff,
                upper: 1.0,
            });
        }
    }
    if radii.last() != Some(&1.0) {
        return Err(Error::InvalidInput("solution grid must end at r = 1".into()));
    }
    if radii.len() < MIN_SAMPLED_NODES {
        return Err(Error::InvalidInput(format!(
            "solution grid needs at least {MIN_SAMPLED_NODES} nodes"
        )));
    }
    check_integrable(f, ctx, cfg.origin_cutoff)?;

    let n = ctx.dim();
    let p = ctx.p;
    let weight = n - 1.0;

    // F at the nodes.
    let node_flux: Vec<f64> = match &f.form {
        ProfileForm::PowerLawAffine { .. } => radii
            .iter()
            .map(|&r| cumulative_source(f, r, ctx, cfg))
            .collect::<Result<_>>()?,
        ProfileForm::Sampled(_) => {
            let mut acc = Vec::with_capacity(radii.len());
            let mut running = cumulative_source_quadrature(f, radii[0], ctx, cfg)?;
            acc.push(running);
            for w in radii.windows(2) {
                running += integrate(|s| f.value(s) * s.powf(weight), w[0], w[1], &[], cfg)?.value;
                acc.push(running);
            }
            acc
        }
    };

    // F at an arbitrary radius inside cell i.
    let flux_at = |i: usize, t: f64| -> f64 {
        match &f.form {
            ProfileForm::PowerLawAffine {
                coefficient,
                exponent,
                offset,
            } => power_affine_antiderivative(*coefficient, *exponent, *offset, t, n),
            ProfileForm::Sampled(_) => {
                let extra = integrate(|s| f.value(s) * s.powf(weight), radii[i], t, &[], cfg)
                    .map(|v| v.value)
                    .unwrap_or(f64::NAN);
                node_flux[i] + extra
            }
        }
    };
    let slope = |big_f: f64, r: f64| phi_inverse_unchecked(-big_f / r.powf(weight), p);

    let derivatives: Vec<f64> = radii
        .iter()
        .zip(&node_flux)
        .map(|(&r, &big_f)| slope(big_f, r))
        .collect();

    let mut values = vec![0.0; radii.len()];
    for i in (0..radii.len() - 1).rev() {
        let piece = integrate(|t| slope(flux_at(i, t), t), radii[i], radii[i + 1], &[], cfg)?;
        values[i] = values[i + 1] - piece.value;
    }
    if values.iter().chain(&derivatives).any(|v| !v.is_finite()) {
        return Err(Error::Numerics("radial solution produced non-finite values".into()));
    }
    // u'' from d/dr[r^{n-1} φ(u')] = -f r^{n-1}.
    let second: Vec<f64> = radii
        .iter()
        .zip(&derivatives)
        .map(|(&r, &d)| {
            let source = f.value(r);
            if d == 0.0 {
                return if source == 0.0 { 0.0 } else { f64::NAN };
            }
            (-source - weight * phi_unchecked(d, p) / r) / ((p - 1.0) * d.abs().powf(p - 2.0))
        })
        .collect();
    let profile = RadialProfile::sampled(radii, values, Some(derivatives))?;
    if second.iter().all(|v| v.is_finite()) {
        profile.with_second_derivatives(second)
    } else {
        Ok(profile)
    }
}

/// Closed-form solution for a pure power source `f = a r^κ`:
/// `u = (K/σ)(r^σ - 1)` with `σ = (κ+1)/(p-1) + 1` and
/// `K = -sgn(a) (|a|/(κ+n))^{1/(p-1)}`. `None` when `σ = 0` (logarithmic case)
/// or the source is not integrable.
pub fn power_source_solution(a: f64, kappa: f64, ctx: &ExponentContext) -> Option<RadialProfile> {
    let n = ctx.dim();
    let p = ctx.p;
    if kappa <= -n {
        return None;
    }
    if a == 0.0 {
        return Some(RadialProfile::zero());
    }
    let sigma = (kappa + 1.0) / (p - 1.0) + 1.0;
    if sigma == 0.0 {
        return None;
    }
    let k = -a.signum() * (a.abs() / (kappa + n)).powf(1.0 / (p - 1.0));
    Some(RadialProfile::power_law_affine(k / sigma, sigma, -1.0))
}

/// Max over `radii` of the relative residual
/// `|-(1/r^{n-1}) d/dr[r^{n-1} φ(u'(r))] - f(r)| / (|f(r)| + floor)`, with the
/// outer derivative a central difference of step `r * 1e-5`.
pub fn p_laplacian_residual(
    u: &RadialProfile,
    f: &RadialProfile,
    ctx: &ExponentContext,
    radii: &[f64],
) -> Result<f64> {
    if radii.is_empty() {
        return Err(Error::InvalidInput("no radii given for residual check".into()));
    }
    let (lo, hi) = RESIDUAL_WINDOW;
    let lo = lo.max(10.0 * u.data_floor());
    let weight = ctx.dim() - 1.0;
    let p = ctx.p;
    let flux = |r: f64| r.powf(weight) * phi_unchecked(u.derivative(r), p);

    let mut worst: f64 = 0.0;
    for &r in radii {
        if !(r >= lo && r <= hi) {
            return Err(Error::OutsideWindow {
                radius: r,
                lower: lo,
                upper: hi,
            });
        }
        let h = r * FLUX_STEP;
        let divergence = (flux(r + h) - flux(r - h)) / (2.0 * h) / r.powf(weight);
        let source = f.value(r);
        let rel = (-divergence - source).abs() / (source.abs() + f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Max over the solution nodes in `(first, 1)` of
/// `|r^{n-1} φ(u'(r)) + F(r)| / (1 + |F(r)|)`.
pub fn flux_identity_defect(
    u: &RadialProfile,
    f: &RadialProfile,
    ctx: &ExponentContext,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let sampled = u
        .as_sampled()
        .ok_or_else(|| Error::InvalidInput("flux identity check needs a sampled solution".into()))?;
    let weight = ctx.dim() - 1.0;
    let radii = sampled.radii();
    let mut worst: f64 = 0.0;
    for (&r, &d) in radii.iter().zip(sampled.derivatives()).skip(1) {
        if r >= 1.0 {
            continue;
        }
        let big_f = cumulative_source(f, r, ctx, cfg)?;
        let defect = (r.powf(weight) * phi_unchecked(d, ctx.p) + big_f).abs() / (1.0 + big_f.abs());
        worst = worst.max(defect);
    }
    Ok(worst)
}
