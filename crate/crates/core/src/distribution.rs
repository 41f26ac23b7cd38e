//! Distribution functions `λ(α) = m{|u| > α}` of radial profiles, Lebesgue
//! norms computed directly and through the layer-cake formula, and the
//! empirical constant of the level-set energy estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ExponentContext;
use crate::optimize::{bisect_radius, golden_max};
use crate::profile::{ProfileForm, RadialProfile};
use crate::quadrature::{integrate_log_radial, power_affine_tail, power_tail, QuadratureConfig};
use crate::sharpness::{divergence_probe, default_deltas, ProbeClassification, ProbeReport};

/// Innermost radius scanned for closed-form profiles.
const SCAN_FLOOR: f64 = 1e-12;
const SCAN_POINTS: usize = 4096;
/// Relative precision of level-set radii.
const ROOT_TOLERANCE: f64 = 1e-12;
/// Smallest radius reached when chasing a level set into a singular core.
const DEEPEST_RADIUS: f64 = 1e-300;

/// `λ` sampled on an increasing height grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionCurve {
    heights: Vec<f64>,
    measures: Vec<f64>,
    total_measure: f64,
}

impl DistributionCurve {
    pub fn new(heights: Vec<f64>, measures: Vec<f64>, total_measure: f64) -> Result<Self> {
        if heights.len() != measures.len() {
            return Err(Error::InvalidInput(format!(
                "{} heights but {} measures",
                heights.len(),
                measures.len()
            )));
        }
        if heights.is_empty() {
            return Err(Error::InvalidInput("distribution curve is empty".into()));
        }
        if !(total_measure > 0.0 && total_measure.is_finite()) {
            return Err(Error::invalid("total_measure", total_measure, "must be positive and finite"));
        }
        if heights.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return Err(Error::InvalidInput("heights must be finite and nonnegative".into()));
        }
        if heights.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("heights must be strictly increasing".into()));
        }
        if measures.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::InvalidInput("measures must be finite and nonnegative".into()));
        }
        if measures.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("measures must be nonincreasing".into()));
        }
        if measures[0] > total_measure * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "measure {} exceeds the domain measure {total_measure}",
                measures[0]
            )));
        }
        Ok(Self {
            heights,
            measures,
            total_measure,
        })
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// The curve on a domain of unit measure with heights divided by `scale`:
    /// `α ↦ λ(scale α) / m(Ω)`.
    pub fn normalized(&self, scale: f64) -> Result<DistributionCurve> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", scale, "must be positive and finite"));
        }
        DistributionCurve::new(
            self.heights.iter().map(|h| h / scale).collect(),
            self.measures.iter().map(|m| m / self.total_measure).collect(),
            1.0,
        )
    }
}

/// How super-level sets are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSetMethod {
    /// One root of `|u(r)| = α`; valid when `|u|` is monotone in `r`.
    RootSolve,
    /// Every crossing of `|u| = α` on the scan grid is located and the shells
    /// where `|u| > α` are summed.
    SuperLevelScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Decreasing,
    Increasing,
    Mixed,
}

/// Level-set measures of one profile, with the monotonicity scan done once.
#[derive(Debug, Clone)]
pub struct LevelSets<'a> {
    u: &'a RadialProfile,
    n: f64,
    omega: f64,
    radii: Vec<f64>,
    abs: Vec<f64>,
    shape: Shape,
}

impl<'a> LevelSets<'a> {
    pub fn new(u: &'a RadialProfile, ctx: &ExponentContext) -> Self {
        let floor = match u.form {
            ProfileForm::Sampled(_) => u.data_floor(),
            ProfileForm::PowerLawAffine { .. } => SCAN_FLOOR,
        };
        let radii = u.scan_radii(floor, SCAN_POINTS);
        let abs: Vec<f64> = radii.iter().map(|&r| u.value(r).abs()).collect();
        let shape = if abs.windows(2).all(|w| w[1] <= w[0]) {
            Shape::Decreasing
        } else if abs.windows(2).all(|w| w[1] >= w[0]) {
            Shape::Increasing
        } else {
            Shape::Mixed
        };
        Self {
            u,
            n: ctx.dim(),
            omega: ctx.ambient_measure,
            radii,
            abs,
            shape,
        }
    }

    /// True when `|u|` is monotone on the scan grid.
    pub fn is_monotone(&self) -> bool {
        self.shape != Shape::Mixed
    }

    pub fn default_method(&self) -> LevelSetMethod {
        if self.is_monotone() {
            LevelSetMethod::RootSolve
        } else {
            LevelSetMethod::SuperLevelScan
        }
    }

    /// Largest `|u|` seen on the scan grid; infinite for singular profiles.
    pub fn sup_estimate(&self) -> f64 {
        if self.u.singular_at_origin {
            f64::INFINITY
        } else {
            self.abs.iter().copied().fold(0.0, f64::max)
        }
    }

    pub fn measure(&self, alpha: f64) -> f64 {
        self.measure_with(alpha, self.default_method())
    }

    pub fn measure_with(&self, alpha: f64, method: LevelSetMethod) -> f64 {
        match (method, self.shape) {
            (LevelSetMethod::RootSolve, Shape::Decreasing) => self.ball_measure(self.decreasing_root(alpha)),
            (LevelSetMethod::RootSolve, Shape::Increasing) => self.increasing_measure(alpha),
            _ => self.scan_measure(alpha),
        }
    }

    fn above(&self, r: f64, alpha: f64) -> bool {
        self.u.value(r).abs() > alpha
    }

    fn ball_measure(&self, r: f64) -> f64 {
        self.omega * r.powf(self.n)
    }

    /// Radius `r_α` with `|u| > α` on `(0, r_α)`, assuming `|u|` decreases.
    fn decreasing_root(&self, alpha: f64) -> f64 {
        let first = self.radii[0];
        if self.above(1.0, alpha) {
            return 1.0;
        }
        if self.above(first, alpha) {
            return bisect_radius(|r| self.above(r, alpha), first, 1.0, ROOT_TOLERANCE).1;
        }
        self.core_root(first, alpha)
    }

    /// Chases the level set below the scan floor of a singular profile.
    fn core_root(&self, first: f64, alpha: f64) -> f64 {
        if !self.u.singular_at_origin {
            return 0.0;
        }
        let mut hi = first;
        let mut lo = first * 0.1;
        while !self.above(lo, alpha) {
            if lo < DEEPEST_RADIUS {
                return 0.0;
            }
            hi = lo;
            lo *= 0.1;
        }
        bisect_radius(|r| self.above(r, alpha), lo, hi, ROOT_TOLERANCE).1
    }

    fn increasing_measure(&self, alpha: f64) -> f64 {
        let first = self.radii[0];
        if !self.above(1.0, alpha) {
            return 0.0;
        }
        if self.above(first, alpha) {
            return self.omega;
        }
        let r = bisect_radius(|r| !self.above(r, alpha), first, 1.0, ROOT_TOLERANCE).1;
        self.shell_measure(r, 1.0)
    }

    fn shell_measure(&self, a: f64, b: f64) -> f64 {
        // ω (b^n - a^n) without cancellation when a ≈ b
        let ln_ratio = (a / b).ln();
        -self.omega * b.powf(self.n) * (self.n * ln_ratio).exp_m1()
    }

    fn scan_measure(&self, alpha: f64) -> f64 {
        let first = self.radii[0];
        let mut total = self.ball_measure(if self.abs[0] > alpha {
            first
        } else {
            self.core_root(first, alpha)
        });
        // position where |u| most recently rose above α
        let mut start = (self.abs[0] > alpha).then_some(first);
        for (i, w) in self.radii.windows(2).enumerate() {
            let (a0, a1) = (self.abs[i] > alpha, self.abs[i + 1] > alpha);
            if a0 == a1 {
                continue;
            }
            let crossing = if a0 {
                bisect_radius(|r| self.above(r, alpha), w[0], w[1], ROOT_TOLERANCE).1
            } else {
                bisect_radius(|r| !self.above(r, alpha), w[0], w[1], ROOT_TOLERANCE).1
            };
            if a0 {
                if let Some(s) = start.take() {
                    total += self.shell_measure(s, crossing);
                }
            } else {
                start = Some(crossing);
            }
        }
        if let Some(s) = start {
            let last = *self.radii.last().expect("scan grid is nonempty");
            total += self.shell_measure(s, last);
            if last < 1.0 && self.above(1.0, alpha) {
                total += self.shell_measure(last, 1.0);
            }
        }
        total
    }
}

/// `λ_u` on the given heights, by root solve when `|u|` is monotone on the scan
/// grid and by super-level scanning otherwise.
pub fn distribution_function(u: &RadialProfile, heights: &[f64], ctx: &ExponentContext) -> Result<DistributionCurve> {
    let sets = LevelSets::new(u, ctx);
    distribution_with(&sets, heights, sets.default_method(), ctx)
}

pub fn distribution_with(
    sets: &LevelSets<'_>,
    heights: &[f64],
    method: LevelSetMethod,
    ctx: &ExponentContext,
) -> Result<DistributionCurve> {
    let mut measures: Vec<f64> = heights.iter().map(|&a| sets.measure_with(a, method)).collect();
    // running minimum absorbs last-bit noise between neighbouring roots
    for i in 1..measures.len() {
        measures[i] = measures[i].min(measures[i - 1]);
    }
    DistributionCurve::new(heights.to_vec(), measures, ctx.ambient_measure)
}

/// Zero followed by `count - 1` geometric heights from `1e-4 S` to `10 S`,
/// where `S` is the supremum of `|u|` or, for singular profiles, `cap`
/// (default `|u(0.01)|`).
pub fn height_grid(u: &RadialProfile, ctx: &ExponentContext, count: usize, cap: Option<f64>) -> Result<Vec<f64>> {
    if count < 3 {
        return Err(Error::invalid("count", count as f64, "at least 3 heights"));
    }
    let sets = LevelSets::new(u, ctx);
    let scale = match cap {
        Some(c) => c,
        None if u.singular_at_origin => u.value(0.01).abs(),
        None => sets.sup_estimate(),
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid("height scale", scale, "must be positive and finite"));
    }
    let mut grid = Vec::with_capacity(count);
    grid.push(0.0);
    grid.extend(crate::profile::log_grid(1e-4 * scale, 10.0 * scale, count - 1));
    Ok(grid)
}

/// Result of a norm computation that may legitimately be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum NormOutcome {
    Finite { value: f64 },
    Diverged { report: ProbeReport },
}

impl NormOutcome {
    pub fn finite(&self) -> Option<f64> {
        match self {
            NormOutcome::Finite { value } => Some(*value),
            NormOutcome::Diverged { .. } => None,
        }
    }
}

/// `(∫_Ω |u|^r)^{1/r}`. Profiles that blow up at the origin are first run
/// through the divergence probe.
pub fn lebesgue_norm(
    u: &RadialProfile,
    r_exp: f64,
    ctx: &ExponentContext,
    cfg: &QuadratureConfig,
) -> Result<NormOutcome> {
    if !(r_exp >= 1.0 && r_exp.is_finite()) {
        return Err(Error::invalid("r_exp", r_exp, "r_exp >= 1"));
    }
    cfg.validate()?;
    if u.singular_at_origin {
        let report = divergence_probe(u, r_exp, ctx, &default_deltas(), cfg)?;
        match report.classification {
            ProbeClassification::Convergent => {}
            ProbeClassification::Inconclusive => {
                return Err(Error::Inconclusive {
                    best_r_squared: report.best_r_squared(),
                })
            }
            _ => return Ok(NormOutcome::Diverged { report }),
        }
    }
    let integral = radial_power_integral(u, r_exp, ctx, cfg)?;
    Ok(NormOutcome::Finite {
        value: integral.powf(1.0 / r_exp),
    })
}

/// `|S^{n-1}| ∫_0^1 |u|^r ρ^{n-1} dρ`, with the piece below the origin cutoff
/// taken from the profile's power-law behaviour there.
pub fn radial_power_integral(
    u: &RadialProfile,
    r_exp: f64,
    ctx: &ExponentContext,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let weight = ctx.dim() - 1.0;
    let cutoff = cfg.origin_cutoff.max(u.data_floor());
    let body = integrate_log_radial(|s| u.value(s).abs().powf(r_exp) * s.powf(weight), cutoff, 1.0, cfg)?;
    let tail = power_integral_tail(u, r_exp, weight, cutoff)?;
    Ok(ctx.sphere_area * (body + tail))
}

fn power_integral_tail(u: &RadialProfile, r_exp: f64, weight: f64, cutoff: f64) -> Result<f64> {
    let divergent = |exponent: f64| Error::NonIntegrableSource {
        exponent,
        bound: -1.0,
    };
    match &u.form {
        ProfileForm::PowerLawAffine {
            coefficient,
            exponent,
            offset,
        } => {
            let lead = if *exponent < 0.0 { exponent * r_exp + weight } else { weight };
            if lead <= -1.0 {
                return Err(divergent(lead));
            }
            let mut c = cutoff;
            loop {
                if let Some(t) = power_affine_tail(*coefficient, *exponent, *offset, r_exp, weight, c) {
                    // the remainder on [c, cutoff] is tiny and smooth in log scale
                    let gap = if c < cutoff {
                        let cfg = QuadratureConfig::default();
                        integrate_log_radial(|s| u.value(s).abs().powf(r_exp) * s.powf(weight), c, cutoff, &cfg)?
                    } else {
                        0.0
                    };
                    return Ok(t + gap);
                }
                c *= 1e-4;
                if c < DEEPEST_RADIUS {
                    return Err(Error::Numerics("affine tail series did not converge".into()));
                }
            }
        }
        ProfileForm::Sampled(_) => {
            let v = u.value(cutoff);
            if v == 0.0 {
                return Ok(0.0);
            }
            let slope = cutoff * u.derivative(cutoff) / v;
            let e = slope * r_exp + weight;
            power_tail(v.abs().powf(r_exp) * cutoff.powf(weight), cutoff, e).ok_or_else(|| divergent(e))
        }
    }
}

/// `(∫_0^∞ r α^{r-1} λ(α) dα)^{1/r}` by the trapezoid rule on the curve's
/// heights, with the part above the last height taken from a power law fitted
/// to `λ` over the top decade.
pub fn layer_cake_norm(curve: &DistributionCurve, r_exp: f64) -> Result<f64> {
    if !(r_exp >= 1.0 && r_exp.is_finite()) {
        return Err(Error::invalid("r_exp", r_exp, "r_exp >= 1"));
    }
    let h = curve.heights();
    let m = curve.measures();
    let g = |i: usize| {
        if m[i] == 0.0 {
            0.0
        } else {
            r_exp * h[i].powf(r_exp - 1.0) * m[i]
        }
    };
    let body: f64 = (1..h.len()).map(|i| 0.5 * (h[i] - h[i - 1]) * (g(i) + g(i - 1))).sum();
    let tail = layer_cake_tail(h, m, r_exp)?;
    Ok((body + tail).powf(1.0 / r_exp))
}

fn layer_cake_tail(h: &[f64], m: &[f64], r_exp: f64) -> Result<f64> {
    let top = *h.last().expect("curve is nonempty");
    let last = *m.last().expect("curve is nonempty");
    if last == 0.0 {
        return Ok(0.0);
    }
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(m)
        .filter(|(a, l)| **a >= 0.1 * top && **a > 0.0 && **l > 0.0)
        .map(|(a, l)| (a.ln(), l.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Numerics("too few points in the top decade for a tail fit".into()));
    }
    let slope = least_squares(&pts).0;
    if slope + r_exp >= 0.0 {
        return Err(Error::DivergentTail { slope, r_exp });
    }
    Ok(r_exp * last * top.powf(r_exp) / -(slope + r_exp))
}

/// Ordinary least-squares line through `(x, y)` points: `(slope, intercept, R²)`.
pub(crate) fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Ingredients of the level-set ratio shared by the constant estimators.
struct LevelSetEstimate<'a> {
    sets: LevelSets<'a>,
    f_norm: f64,
    ctx: &'a ExponentContext,
}

impl<'a> LevelSetEstimate<'a> {
    fn new(u: &'a RadialProfile, f: &RadialProfile, ctx: &'a ExponentContext, cfg: &QuadratureConfig) -> Result<Self> {
        let f_norm = lebesgue_norm(f, ctx.q, ctx, cfg)?.finite().ok_or_else(|| {
            Error::InvalidInput("source is not in L^q".into())
        })?;
        if !(f_norm > 0.0) {
            return Err(Error::InvalidInput("source has zero L^q norm".into()));
        }
        Ok(Self {
            sets: LevelSets::new(u, ctx),
            f_norm,
            ctx,
        })
    }

    /// `λ(β)^{(n-p)/n} (β-α)^{p-1} / (‖f‖_q λ(α)^{(q-1)/q})`; zero when `λ(β)` vanishes.
    fn ratio(&self, alpha: f64, beta: f64) -> Result<f64> {
        let (n, p, q) = (self.ctx.dim(), self.ctx.p, self.ctx.q);
        let upper = self.sets.measure(beta);
        if upper == 0.0 {
            return Ok(0.0);
        }
        let lower = self.sets.measure(alpha);
        if lower == 0.0 {
            return Err(Error::ZeroMeasure { alpha });
        }
        Ok(upper.powf((n - p) / n) * (beta - alpha).powf(p - 1.0) / (self.f_norm * lower.powf((q - 1.0) / q)))
    }
}

fn check_pair(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0 && beta > alpha && beta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "level pair ({alpha}, {beta}) needs 0 <= alpha < beta"
        )));
    }
    Ok(())
}

fn is_zero_profile(u: &RadialProfile) -> bool {
    match &u.form {
        ProfileForm::PowerLawAffine {
            coefficient,
            exponent,
            offset,
        } => *coefficient == 0.0 || (*exponent == 0.0 && *offset == -1.0),
        ProfileForm::Sampled(s) => s.values().iter().all(|v| *v == 0.0),
    }
}

/// Smallest `C` for which the level-set estimate
/// `λ(β) ≤ (C ‖f‖_q λ(α)^{(q-1)/q} / (β-α)^{p-1})^{n/(n-p)}` holds on `pairs`.
pub fn lemma1_empirical_constant(
    u: &RadialProfile,
    f: &RadialProfile,
    ctx: &ExponentContext,
    pairs: &[(f64, f64)],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    for &(a, b) in pairs {
        check_pair(a, b)?;
    }
    let est = LevelSetEstimate::new(u, f, ctx, cfg)?;
    if is_zero_profile(u) {
        return Ok(0.0);
    }
    pairs.iter().try_fold(0.0_f64, |acc, &(a, b)| Ok(acc.max(est.ratio(a, b)?)))
}

/// Supremum estimate of the ratio over `0 ≤ α < β`: the best pairs of the
/// `alphas × betas` grid are polished by alternating golden-section searches
/// in `β` and in `α`.
pub fn lemma1_refined_constant(
    u: &RadialProfile,
    f: &RadialProfile,
    ctx: &ExponentContext,
    alphas: &[f64],
    betas: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let pairs = grid_pairs(alphas, betas);
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    let est = LevelSetEstimate::new(u, f, ctx, cfg)?;
    if is_zero_profile(u) {
        return Ok(0.0);
    }
    let mut scored = pairs
        .iter()
        .map(|&(a, b)| Ok((est.ratio(a, b)?, a, b)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));
    let top = betas.iter().copied().fold(0.0, f64::max);
    let beta_cap = top.min(est.sets.sup_estimate()).max(f64::MIN_POSITIVE);

    let safe = |a: f64, b: f64| {
        if b > a {
            est.ratio(a, b).unwrap_or(0.0)
        } else {
            0.0
        }
    };
    let mut best = scored[0].0;
    for &(_, mut a, mut b) in scored.iter().take(3) {
        for _ in 0..6 {
            let (nb, _) = golden_max(|x| safe(a, x), a, beta_cap.max(b), 1e-12);
            b = nb;
            let (na, _) = golden_max(|x| safe(x, b), 0.0, b, 1e-12);
            a = na;
        }
        best = best.max(safe(a, b));
    }
    Ok(best)
}

/// All `(α, β)` with `α` from `alphas`, `β` from `betas` and `β > α`.
pub fn grid_pairs(alphas: &[f64], betas: &[f64]) -> Vec<(f64, f64)> {
    alphas
        .iter()
        .flat_map(|&a| betas.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
        .collect()
}

/// Pairs on which the estimate with constant `c` fails:
/// `λ(β) > (c ‖f‖_q λ(α)^{(q-1)/q} / (β-α)^{p-1})^{n/(n-p)}`.
pub fn lemma1_violations(
    u: &RadialProfile,
    f: &RadialProfile,
    ctx: &ExponentContext,
    pairs: &[(f64, f64)],
    c: f64,
    cfg: &QuadratureConfig,
) -> Result<Vec<(f64, f64)>> {
    let est = LevelSetEstimate::new(u, f, ctx, cfg)?;
    let mut bad = Vec::new();
    for &(a, b) in pairs {
        check_pair(a, b)?;
        if est.ratio(a, b)? > c {
            bad.push((a, b));
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::validate_context;
    use crate::radial::solve_radial;
    use approx::assert_relative_eq;

    fn ctx3() -> ExponentContext {
        validate_context(3, 2.0, 1.2).unwrap()
    }

    fn parabola() -> RadialProfile {
        RadialProfile::power_law_affine(-1.0 / 6.0, 2.0, -1.0)
    }

    #[test]
    fn linear_profile_inverts_directly() {
        let ctx = ctx3();
        let u = RadialProfile::power_law_affine(-1.0, 1.0, -1.0);
        let w = ctx.ambient_measure;
        let heights = [0.0, 0.1, 0.5, 0.9, 0.999, 1.0, 2.0];
        let curve = distribution_function(&u, &heights, &ctx).unwrap();
        for (a, m) in heights.iter().zip(curve.measures()) {
            let exact = if *a < 1.0 { w * (1.0 - a).powi(3) } else { 0.0 };
            assert_relative_eq!(*m, exact, max_relative = 1e-10, epsilon = 1e-300);
        }
    }

    #[test]
    fn parabola_level_sets() {
        let ctx = ctx3();
        let w = ctx.ambient_measure;
        let heights: Vec<f64> = (0..40).map(|i| i as f64 / 234.0).collect();
        let curve = distribution_function(&parabola(), &heights, &ctx).unwrap();
        for (a, m) in heights.iter().zip(curve.measures()) {
            let exact = w * (1.0 - 6.0 * a).max(0.0).powf(1.5);
            assert_relative_eq!(*m, exact, max_relative = 1e-10, epsilon = 1e-14);
        }
    }

    #[test]
    fn methods_agree_on_singular_profile() {
        let ctx = ctx3();
        let u = RadialProfile::power_law_affine(2.5, -3.0 / 7.0, -1.0);
        let sets = LevelSets::new(&u, &ctx);
        assert!(sets.is_monotone());
        for a in [1e-3, 0.1, 1.0, 10.0, 1e3, 1e6] {
            let root = sets.measure_with(a, LevelSetMethod::RootSolve);
            let scan = sets.measure_with(a, LevelSetMethod::SuperLevelScan);
            assert!(root > 0.0);
            assert_relative_eq!(root, scan, max_relative = 1e-6);
        }
    }

    #[test]
    fn scan_handles_non_monotone_profile() {
        let ctx = ctx3();
        // |r - 1/2|: above α on [0, 1/2 - α) and (1/2 + α, 1]
        let u = RadialProfile::power_law_affine(1.0, 1.0, -0.5);
        let r: Vec<f64> = crate::profile::log_grid(1e-4, 1.0, 400);
        let v: Vec<f64> = r.iter().map(|x| (x - 0.5f64).abs()).collect();
        let sampled = RadialProfile::sampled(r, v, None).unwrap();
        let sets = LevelSets::new(&sampled, &ctx);
        assert!(!sets.is_monotone());
        let w = ctx.ambient_measure;
        for a in [0.05f64, 0.2, 0.45] {
            let exact = w * ((0.5 - a).powi(3) + 1.0 - (0.5 + a).powi(3));
            assert_relative_eq!(sets.measure(a), exact, max_relative = 1e-6);
            assert_relative_eq!(
                LevelSets::new(&u, &ctx).measure(a),
                exact,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn heights_above_sup_have_zero_measure() {
        let ctx = ctx3();
        let curve = distribution_function(&parabola(), &[0.2, 1.0], &ctx).unwrap();
        assert_eq!(curve.measures(), &[0.0, 0.0]);
        let zero = distribution_function(&RadialProfile::zero(), &[0.0, 1.0], &ctx).unwrap();
        assert_eq!(zero.measures(), &[0.0, 0.0]);
    }

    #[test]
    fn curve_validation() {
        assert!(DistributionCurve::new(vec![0.0, 1.0], vec![1.0, 2.0], 3.0).is_err());
        assert!(DistributionCurve::new(vec![1.0, 0.0], vec![1.0, 0.5], 3.0).is_err());
        assert!(DistributionCurve::new(vec![0.0, 1.0], vec![4.0, 0.5], 3.0).is_err());
        let c = DistributionCurve::new(vec![0.0, 2.0], vec![3.0, 1.5], 3.0).unwrap();
        let n = c.normalized(2.0).unwrap();
        assert_eq!(n.heights(), &[0.0, 1.0]);
        assert_eq!(n.measures(), &[1.0, 0.5]);
    }

    #[test]
    fn constant_norm() {
        let ctx = ctx3();
        let cfg = QuadratureConfig::default();
        for r in [1.0, 2.0, 7.5] {
            let v = lebesgue_norm(&RadialProfile::constant(1.0), r, &ctx, &cfg).unwrap();
            assert_relative_eq!(v.finite().unwrap(), ctx.ambient_measure.powf(1.0 / r), max_relative = 1e-12);
        }
    }

    #[test]
    fn parabola_norm_matches_polynomial() {
        let ctx = ctx3();
        let cfg = QuadratureConfig::default();
        // ∫_0^1 (1-ρ²)² ρ² dρ / 36 = (1/3 - 2/5 + 1/7) / 36 = 8/105/36
        let exact = (4.0 * std::f64::consts::PI * 8.0 / 105.0 / 36.0).sqrt();
        let v = lebesgue_norm(&parabola(), 2.0, &ctx, &cfg).unwrap();
        assert_relative_eq!(v.finite().unwrap(), exact, max_relative = 1e-8);
    }

    #[test]
    fn singular_norm_uses_tail_and_detects_divergence() {
        let ctx = ctx3();
        let cfg = QuadratureConfig::default();
        let u = RadialProfile::power(1.0, -0.5);
        // ∫ ρ^{-1} ρ^2 4π = 2π
        let v = lebesgue_norm(&u, 2.0, &ctx, &cfg).unwrap();
        assert_relative_eq!(v.finite().unwrap(), (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-10);
        assert!(matches!(
            lebesgue_norm(&u, 6.0, &ctx, &cfg).unwrap(),
            NormOutcome::Diverged { .. }
        ));
    }

    #[test]
    fn layer_cake_trivial_curves() {
        let h: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let m: Vec<f64> = h.iter().map(|a| 1.0 - a).collect();
        let c = DistributionCurve::new(h.clone(), m, 1.0).unwrap();
        assert_relative_eq!(layer_cake_norm(&c, 1.0).unwrap(), 0.5, max_relative = 1e-12);
        let z = DistributionCurve::new(h.clone(), vec![0.0; h.len()], 1.0).unwrap();
        assert_eq!(layer_cake_norm(&z, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn layer_cake_matches_direct_for_parabola() {
        let ctx = ctx3();
        let cfg = QuadratureConfig::default();
        let u = parabola();
        let curve = distribution_function(&u, &height_grid(&u, &ctx, 2048, None).unwrap(), &ctx).unwrap();
        for r in [1.0, 2.0, 5.0] {
            let direct = lebesgue_norm(&u, r, &ctx, &cfg).unwrap().finite().unwrap();
            assert_relative_eq!(layer_cake_norm(&curve, r).unwrap(), direct, max_relative = 1e-4);
        }
    }

    #[test]
    fn layer_cake_tail_of_singular_profile() {
        let ctx = ctx3();
        let cfg = QuadratureConfig::default();
        let u = RadialProfile::power(1.0, -0.5);
        let curve = distribution_function(&u, &height_grid(&u, &ctx, 2048, None).unwrap(), &ctx).unwrap();
        let direct = lebesgue_norm(&u, 2.0, &ctx, &cfg).unwrap().finite().unwrap();
        assert_relative_eq!(layer_cake_norm(&curve, 2.0).unwrap(), direct, max_relative = 1e-4);
        assert!(matches!(layer_cake_norm(&curve, 6.5), Err(Error::DivergentTail { .. })));
    }

    #[test]
    fn lemma1_constant_for_unit_source() {
        let ctx = ctx3();
        let cfg = QuadratureConfig::default();
        let f = RadialProfile::constant(1.0);
        let u = parabola();
        let s = 1.0 / 6.0;
        let grid: Vec<f64> = (0..20).map(|i| s * i as f64 / 20.0).collect();
        let betas: Vec<f64> = (1..=20).map(|i| s * i as f64 / 20.0).collect();
        let plain = lemma1_empirical_constant(&u, &f, &ctx, &grid_pairs(&grid, &betas), &cfg).unwrap();
        let refined = lemma1_refined_constant(&u, &f, &ctx, &grid, &betas, &cfg).unwrap();
        // sup at α = 0, β = 1/9: (1/(9√3)) ω^{-2/3} / ‖1‖_q ... with ‖1‖_q = ω^{1/q}
        let w = ctx.ambient_measure;
        let exact = (1.0 / (9.0 * 3f64.sqrt())) * w.powf(-2.0 / 3.0);
        assert!(plain <= refined * (1.0 + 1e-12));
        assert_relative_eq!(refined, exact, max_relative = 1e-9);
    }

    #[test]
    fn lemma1_edge_cases() {
        let ctx = ctx3();
        let cfg = QuadratureConfig::default();
        let f = RadialProfile::constant(1.0);
        assert!(matches!(
            lemma1_empirical_constant(&parabola(), &f, &ctx, &[], &cfg),
            Err(Error::EmptyPairs)
        ));
        assert_eq!(
            lemma1_empirical_constant(&RadialProfile::zero(), &f, &ctx, &[(0.0, 1.0)], &cfg).unwrap(),
            0.0
        );
        assert!(matches!(
            lemma1_empirical_constant(&parabola(), &f, &ctx, &[(0.5, 0.6)], &cfg),
            Ok(c) if c == 0.0
        ));
        assert!(lemma1_empirical_constant(&parabola(), &f, &ctx, &[(0.1, 0.05)], &cfg).is_err());
    }

    #[test]
    fn lemma1_constant_scales_out() {
        let ctx = ctx3();
        let cfg = QuadratureConfig::default();
        let f = RadialProfile::power(1.0, 1.0);
        let u1 = solve_radial(&f, &ctx, &cfg, 512).unwrap();
        let u10 = solve_radial(&f.scaled(10.0), &ctx, &cfg, 512).unwrap();
        let s1 = u1.value(1e-8).abs();
        let t = 10f64.powf(1.0 / (ctx.p - 1.0));
        let pairs = |s: f64| {
            let a: Vec<f64> = (0..20).map(|i| s * i as f64 / 20.0).collect();
            let b: Vec<f64> = (1..=20).map(|i| s * i as f64 / 20.0).collect();
            grid_pairs(&a, &b)
        };
        let c1 = lemma1_empirical_constant(&u1, &f, &ctx, &pairs(s1), &cfg).unwrap();
        let c10 = lemma1_empirical_constant(&u10, &f.scaled(10.0), &ctx, &pairs(t * s1), &cfg).unwrap();
        assert_relative_eq!(c1, c10, max_relative = 1e-8);
    }
}
