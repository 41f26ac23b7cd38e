//! The recursive bound on the distribution function,
//!
//! ```text
//! λ_0 ≡ 1,   λ_{k+1}(β) = inf_{0≤α<β} (λ_k(α)^{(q-1)/q} / (β-α)^{p-1})^{n/(n-p)},
//! ```
//!
//! in both the subcritical and the critical regime, with the closed-form
//! envelopes it is compared against.

use serde::{Deserialize, Serialize};

use crate::distribution::DistributionCurve;
use crate::error::{Error, Result};
use crate::exponents::{ExponentContext, Regime};
use crate::optimize::golden_min;

pub const MAX_ITERATIONS: usize = 60;
pub const MAX_ENVELOPE_K: usize = 10_000;
pub const MAX_INTERVAL_K: usize = 1_000_000;
/// Relative tolerance for ties between envelope terms and interval membership.
const TIE_TOLERANCE: f64 = 1e-12;
/// Equally spaced interior fractions of `β` tried before the golden search.
const FRACTIONS: usize = 32;

/// `λ_0, …, λ_K` on a grid of heights, stored as logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub ctx: ExponentContext,
    beta_grid: Vec<f64>,
    ln_lambda: Vec<Vec<f64>>,
    /// Minimising `α` of step `k → k+1`, per height.
    argmin: Vec<Vec<f64>>,
    pub k_max: usize,
    pub normalized: bool,
}

impl IterationState {
    pub fn beta_grid(&self) -> &[f64] {
        &self.beta_grid
    }

    pub fn ln_lambda(&self, k: usize) -> &[f64] {
        &self.ln_lambda[k]
    }

    pub fn lambda(&self, k: usize) -> Vec<f64> {
        self.ln_lambda[k].iter().map(|v| v.exp()).collect()
    }

    /// Minimisers of the step that produced `λ_{k+1}`.
    pub fn argmin(&self, k: usize) -> &[f64] {
        &self.argmin[k]
    }

    /// `ln λ_k(α)`, linear in `ln α` between nodes and extended linearly
    /// beyond them; `+∞` at `α = 0` once `k ≥ 1`.
    pub fn ln_lambda_at(&self, k: usize, alpha: f64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        if alpha <= 0.0 {
            return f64::INFINITY;
        }
        let g = &self.beta_grid;
        let v = &self.ln_lambda[k];
        let i = g.partition_point(|&b| b < alpha).clamp(1, g.len() - 1);
        let (x0, x1) = (g[i - 1].ln(), g[i].ln());
        let t = (alpha.ln() - x0) / (x1 - x0);
        v[i - 1] + t * (v[i] - v[i - 1])
    }

    /// `ln` of the step value at one `α`.
    fn step_objective(&self, k: usize, alpha: f64, beta: f64) -> f64 {
        let gap = beta - alpha;
        if gap <= 0.0 {
            return f64::INFINITY;
        }
        let ell = self.ctx.iteration_ratio;
        let e = self.ctx.gap_exponent();
        let lk = self.ln_lambda_at(k, alpha);
        if lk == f64::INFINITY {
            return f64::INFINITY;
        }
        ell * lk - e * gap.ln()
    }

    /// `ln` of the step `k → k+1` at `β` evaluated with `α = β/2`.
    pub fn ln_half_step(&self, k: usize, beta: f64) -> f64 {
        self.step_objective(k, 0.5 * beta, beta)
    }

    fn infimum(&self, k: usize, beta: f64) -> (f64, f64) {
        let mut cands: Vec<f64> = self.beta_grid.iter().copied().filter(|&a| a < beta).collect();
        cands.push(0.0);
        cands.extend((1..FRACTIONS).map(|j| beta * j as f64 / FRACTIONS as f64));
        cands.push(0.5 * beta);
        cands.sort_by(f64::total_cmp);
        cands.dedup();
        let values: Vec<f64> = cands.iter().map(|&a| self.step_objective(k, a, beta)).collect();
        let best = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("candidate list is nonempty");
        let lo = if best == 0 { 0.0 } else { cands[best - 1] };
        let hi = cands.get(best + 1).copied().unwrap_or(beta);
        let (a, v) = golden_min(|a| self.step_objective(k, a, beta), lo, hi, 1e-14);
        if v < values[best] {
            (a, v)
        } else {
            (cands[best], values[best])
        }
    }
}

fn check_grid(beta_grid: &[f64], k_max: usize) -> Result<()> {
    if k_max > MAX_ITERATIONS {
        return Err(Error::invalid("K", k_max as f64, "K <= 60"));
    }
    if beta_grid.len() < 2 || beta_grid.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidInput("height grid must hold at least two positive values".into()));
    }
    if beta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("height grid must be strictly increasing".into()));
    }
    if beta_grid[0] > 0.1 || *beta_grid.last().expect("nonempty") < 1e3 {
        return Err(Error::InvalidInput("height grid must span [0.1, 1000]".into()));
    }
    Ok(())
}

fn iterate(ctx: &ExponentContext, beta_grid: &[f64], k_max: usize) -> Result<IterationState> {
    check_grid(beta_grid, k_max)?;
    let mut state = IterationState {
        ctx: ctx.clone(),
        beta_grid: beta_grid.to_vec(),
        ln_lambda: vec![vec![0.0; beta_grid.len()]],
        argmin: Vec::with_capacity(k_max),
        k_max,
        normalized: true,
    };
    for k in 0..k_max {
        let (alphas, values): (Vec<f64>, Vec<f64>) = beta_grid.iter().map(|&b| state.infimum(k, b)).unzip();
        state.argmin.push(alphas);
        state.ln_lambda.push(values);
    }
    Ok(state)
}

pub fn iterate_subcritical(ctx: &ExponentContext, beta_grid: &[f64], k_max: usize) -> Result<IterationState> {
    ctx.require(Regime::Subcritical)?;
    iterate(ctx, beta_grid, k_max)
}

pub fn iterate_critical(ctx: &ExponentContext, beta_grid: &[f64], k_max: usize) -> Result<IterationState> {
    ctx.require(Regime::Critical)?;
    iterate(ctx, beta_grid, k_max)
}

/// `e_k = (p-1)q/(q-1) · ℓ(1-ℓ^k)/(1-ℓ)`
pub fn subcritical_exponent(ctx: &ExponentContext, k: usize) -> Result<f64> {
    ctx.require(Regime::Subcritical)?;
    let l = ctx.iteration_ratio;
    Ok(ctx.series_prefactor() * l * (1.0 - l.powi(k as i32)) / (1.0 - l))
}

/// `(2/β)^{e_k}`
pub fn subcritical_closed_form(ctx: &ExponentContext, beta: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", 0.0, "k >= 1"));
    }
    Ok((2.0 / beta).powf(subcritical_exponent(ctx, k)?))
}

/// `(2/β)^{r*}`, the `k → ∞` form.
pub fn subcritical_limit_bound(ctx: &ExponentContext, beta: f64) -> Result<f64> {
    ctx.require(Regime::Subcritical)?;
    Ok((2.0 / beta).powf(ctx.sharp_exponent.expect("subcritical")))
}

/// `ln(2^{σ_k} β^{-e_k})` with `σ_1 = e_1`, `σ_{k+1} = e_{k+1} + ℓ σ_k`: the
/// bound obtained by taking `α = β/2` at every step while keeping the
/// accumulated constants.
pub fn subcritical_chain_bound_ln(ctx: &ExponentContext, beta: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", 0.0, "k >= 1"));
    }
    let l = ctx.iteration_ratio;
    let mut sigma = subcritical_exponent(ctx, 1)?;
    for j in 2..=k {
        sigma = subcritical_exponent(ctx, j)? + l * sigma;
    }
    Ok(sigma * std::f64::consts::LN_2 - subcritical_exponent(ctx, k)? * beta.ln())
}

/// Pointwise comparison of the computed infimum, the `α = β/2` step and an
/// upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub checked: usize,
    /// Points where the infimum exceeds the `α = β/2` value.
    pub infimum_violations: usize,
    /// Points where the `α = β/2` value exceeds `(2/β)^{e_k}`.
    pub closed_form_violations: usize,
    /// Points where the `α = β/2` value exceeds `2^{σ_k} β^{-e_k}`.
    pub chain_violations: usize,
    /// First `(k, β)` violating the closed form.
    pub first_closed_form_violation: Option<(usize, f64)>,
    /// Largest `ln(half / closed_form)` seen.
    pub worst_closed_form_log_excess: f64,
}

impl SandwichReport {
    pub fn literal_violations(&self) -> usize {
        self.infimum_violations + self.closed_form_violations
    }

    pub fn corrected_violations(&self) -> usize {
        self.infimum_violations + self.chain_violations
    }
}

/// Checks `λ_k ≤ half_k ≤ bound_k` for `1 ≤ k ≤ K` on the state's grid, with
/// relative slack `1e-12` on each comparison.
pub fn subcritical_sandwich(state: &IterationState) -> Result<SandwichReport> {
    let ctx = &state.ctx;
    ctx.require(Regime::Subcritical)?;
    let slack = 1e-12;
    let mut report = SandwichReport {
        checked: 0,
        infimum_violations: 0,
        closed_form_violations: 0,
        chain_violations: 0,
        first_closed_form_violation: None,
        worst_closed_form_log_excess: f64::NEG_INFINITY,
    };
    for k in 1..=state.k_max {
        let e_k = subcritical_exponent(ctx, k)?;
        for (i, &beta) in state.beta_grid.iter().enumerate() {
            let inf = state.ln_lambda[k][i];
            let half = state.ln_half_step(k - 1, beta);
            let closed = e_k * (2.0 / beta).ln();
            let chain = subcritical_chain_bound_ln(ctx, beta, k)?;
            report.checked += 1;
            if inf > half + slack * half.abs().max(1.0) {
                report.infimum_violations += 1;
            }
            let excess = half - closed;
            report.worst_closed_form_log_excess = report.worst_closed_form_log_excess.max(excess);
            if excess > slack * closed.abs().max(1.0) {
                report.closed_form_violations += 1;
                report.first_closed_form_violation.get_or_insert((k, beta));
            }
            if half - chain > slack * chain.abs().max(1.0) {
                report.chain_violations += 1;
            }
        }
    }
    Ok(report)
}

/// Decay exponent of `λ_k`: least-squares slope of `-ln λ_k` against `ln β`.
pub fn decay_exponent(state: &IterationState, k: usize) -> f64 {
    let pts: Vec<(f64, f64)> = state
        .beta_grid
        .iter()
        .zip(&state.ln_lambda[k])
        .map(|(b, l)| (b.ln(), -l))
        .collect();
    crate::distribution::least_squares(&pts).0
}

/// `ln(k^k / (k-1)^{k-1})` with `0^0 = 1`, free of cancellation for large `k`.
pub fn ln_interval_left(k: usize) -> f64 {
    match k {
        0 => f64::NEG_INFINITY,
        1 => 0.0,
        _ => {
            let kf = k as f64;
            kf.ln() + (kf - 1.0) * (1.0 / (kf - 1.0)).ln_1p()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalInterval {
    pub k: usize,
    pub left: f64,
    pub right: f64,
    pub length: f64,
}

impl CriticalInterval {
    pub fn new(k: usize) -> Self {
        let ln_left = ln_interval_left(k);
        let ln_right = ln_interval_left(k + 1);
        let left = ln_left.exp();
        Self {
            k,
            left,
            right: ln_right.exp(),
            length: left * (ln_right - ln_left).exp_m1(),
        }
    }
}

pub fn interval_table(k_max: usize) -> Result<Vec<CriticalInterval>> {
    if k_max < 2 {
        return Err(Error::invalid("k_max", k_max as f64, "k_max >= 2"));
    }
    if k_max > MAX_INTERVAL_K {
        return Err(Error::invalid("k_max", k_max as f64, "k_max <= 1e6"));
    }
    Ok((1..=k_max).map(CriticalInterval::new).collect())
}

/// Length of `I_{k_max}`.
pub fn interval_length_limit(k_max: usize) -> Result<f64> {
    if k_max < 2 {
        return Err(Error::invalid("k_max", k_max as f64, "k_max >= 2"));
    }
    if k_max > MAX_INTERVAL_K {
        return Err(Error::invalid("k_max", k_max as f64, "k_max <= 1e6"));
    }
    Ok(CriticalInterval::new(k_max).length)
}

/// `(k^k/β^k)^{(p-1)n/(n-p)}`
pub fn critical_bound(ctx: &ExponentContext, beta: f64, k: usize) -> f64 {
    let kf = k as f64;
    let ln_kk = if k == 0 { 0.0 } else { kf * kf.ln() };
    (ctx.gap_exponent() * (ln_kk - kf * beta.ln())).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub value: f64,
    /// Zero when the constant 1 is the minimum (`β < 1`).
    pub argmin_k: usize,
}

/// `min(1, min_{1≤k≤10⁴} (k^k/β^k)^{(p-1)n/(n-p)})`, ties going to the larger
/// `k`; errors if `β` is not in `I_{argmin}`.
pub fn critical_envelope(ctx: &ExponentContext, beta: f64) -> Result<Envelope> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", beta, "must be positive and finite"));
    }
    if beta < 1.0 {
        return Ok(Envelope {
            value: 1.0,
            argmin_k: 0,
        });
    }
    let e = ctx.gap_exponent();
    let lb = beta.ln();
    let mut best = (0.0_f64, 0usize);
    for k in 1..=MAX_ENVELOPE_K {
        let kf = k as f64;
        let v = kf * (kf.ln() - lb);
        if v <= best.0 + TIE_TOLERANCE * best.0.abs().max(v.abs()).max(1.0) {
            best = (v.min(best.0), k);
        } else if kf > beta {
            // k(ln k - ln β) is convex in k and already increasing
            break;
        }
    }
    let (value, k) = best;
    let ln_l = ln_interval_left(k);
    let ln_r = ln_interval_left(k + 1);
    let tol = TIE_TOLERANCE * lb.abs().max(1.0);
    if k < MAX_ENVELOPE_K && !(lb >= ln_l - tol && lb < ln_r + tol) {
        return Err(Error::Numerics(format!("beta {beta} is not in I_{k}")));
    }
    Ok(Envelope {
        value: (e * value).exp(),
        argmin_k: k,
    })
}

/// Minimisers that miss `kβ/(k+1)` by more than two local grid spacings:
/// `(k, β, α_numeric)`.
pub fn critical_optimizer_misses(state: &IterationState) -> Result<Vec<(usize, f64, f64)>> {
    state.ctx.require(Regime::Critical)?;
    let g = &state.beta_grid;
    let step = |alpha: f64| {
        let i = g.partition_point(|&b| b < alpha).clamp(1, g.len() - 1);
        alpha.max(g[0]) * (g[i] / g[i - 1] - 1.0)
    };
    let mut misses = Vec::new();
    for (k, alphas) in state.argmin.iter().enumerate() {
        for (&beta, &a) in g.iter().zip(alphas) {
            let exact = k as f64 * beta / (k as f64 + 1.0);
            if (a - exact).abs() > 2.0 * step(exact) {
                misses.push((k, beta, a));
            }
        }
    }
    Ok(misses)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSeries {
    pub r_exp: f64,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// `(k^k/(k-1)^{k-1})^{r-1} ((k-1)/k)^{(k²-k)(p-1)n/(n-p)}`
    pub raw_terms: Vec<f64>,
    /// The constant `e^{r-1+(p-1)n/(n-p)}` bounding `raw_terms / terms`.
    pub raw_term_constant: f64,
    /// Upper bound on the sum of the omitted terms.
    pub tail_bound: f64,
    pub converged: bool,
}

/// Partial sums of `Σ k^{r-1} e^{-k(p-1)n/(n-p)}` for `k = 1..K`.
pub fn critical_series(ctx: &ExponentContext, r_exp: f64, k_max: usize) -> Result<CriticalSeries> {
    ctx.require(Regime::Critical)?;
    if !(r_exp >= 1.0 && r_exp.is_finite()) {
        return Err(Error::invalid("r_exp", r_exp, "r_exp >= 1"));
    }
    if k_max < 2 {
        return Err(Error::invalid("K", k_max as f64, "K >= 2"));
    }
    let e = ctx.gap_exponent();
    let ln_term = |k: f64| (r_exp - 1.0) * k.ln() - k * e;
    let mut terms = Vec::with_capacity(k_max);
    let mut raw_terms = Vec::with_capacity(k_max);
    let mut partial_sums = Vec::with_capacity(k_max);
    let mut sum = 0.0;
    for k in 1..=k_max {
        let kf = k as f64;
        let t = ln_term(kf).exp();
        let raw = if k == 1 {
            1.0
        } else {
            ((r_exp - 1.0) * ln_interval_left(k) + (kf * kf - kf) * e * (-1.0 / kf).ln_1p()).exp()
        };
        sum += t;
        terms.push(t);
        raw_terms.push(raw);
        partial_sums.push(sum);
    }
    let raw_term_constant = (r_exp - 1.0 + e).exp();
    if let Some(k) = (0..k_max).find(|&i| raw_terms[i] > raw_term_constant * terms[i] * (1.0 + 1e-12)) {
        return Err(Error::Numerics(format!(
            "term {} exceeds the simplified bound",
            k + 1
        )));
    }
    // successive ratios ((k+1)/k)^{r-1} e^{-E} decrease in k, so the omitted
    // terms are dominated by a geometric series once the ratio is below 1
    let next = (k_max + 1) as f64;
    let ratio = ((r_exp - 1.0) * (1.0 / next).ln_1p() - e).exp();
    let tail_bound = if ratio < 1.0 {
        ln_term(next).exp() / (1.0 - ratio)
    } else {
        f64::INFINITY
    };
    let last = terms[k_max - 1];
    let converged = last < 1e-14 * sum && tail_bound < 1e-14 * sum;
    Ok(CriticalSeries {
        r_exp,
        terms,
        partial_sums,
        raw_terms,
        raw_term_constant,
        tail_bound,
        converged,
    })
}

/// Height scale that turns a solution into the normalized setting of the
/// recursion: with `κ = (C‖f‖_q)^{1/(p-1)}` and `s = m(Ω)^{(ℓ-1)/E}`, the
/// curve `β ↦ λ_u(κ s β)/m(Ω)` obeys the recursion on a unit-measure domain.
pub fn dominance_scale(ctx: &ExponentContext, constant: f64, source_norm: f64) -> f64 {
    let kappa = (constant * source_norm).powf(1.0 / (ctx.p - 1.0));
    let s = ctx.ambient_measure.powf((ctx.iteration_ratio - 1.0) / ctx.gap_exponent());
    kappa * s
}

/// Points `(k, β)` where the normalized curve exceeds `min(1, λ_k)·(1+slack)`.
/// The curve's heights must coincide with the state's grid.
pub fn dominance_violations(
    state: &IterationState,
    normalized: &DistributionCurve,
    k_max: usize,
    slack: f64,
) -> Result<Vec<(usize, f64)>> {
    if normalized.heights().len() != state.beta_grid.len()
        || normalized
            .heights()
            .iter()
            .zip(&state.beta_grid)
            .any(|(h, b)| ((h - b) / b).abs() > 1e-12)
    {
        return Err(Error::InvalidInput("curve heights must match the iteration grid".into()));
    }
    if k_max > state.k_max {
        return Err(Error::invalid("k_max", k_max as f64, "at most the iteration count"));
    }
    let mut out = Vec::new();
    for k in 0..=k_max {
        for ((&b, &m), &l) in state.beta_grid.iter().zip(normalized.measures()).zip(&state.ln_lambda[k]) {
            if m > l.exp().min(1.0) * (1.0 + slack) {
                out.push((k, b));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::validate_context;
    use crate::profile::log_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sub() -> ExponentContext {
        validate_context(3, 2.0, 1.2).unwrap()
    }

    fn crit() -> ExponentContext {
        validate_context(3, 2.0, 1.5).unwrap()
    }

    fn grid() -> Vec<f64> {
        log_grid(0.1, 1e3, 200)
    }

    #[test]
    fn first_step_is_exact() {
        let st = iterate_subcritical(&sub(), &grid(), 1).unwrap();
        for (i, &b) in grid().iter().enumerate() {
            assert_relative_eq!(st.ln_lambda(1)[i], -3.0 * b.ln(), epsilon = 1e-12);
            assert_eq!(st.argmin(0)[i], 0.0);
        }
    }

    #[test]
    fn subcritical_steps_follow_exact_recursion() {
        // λ_k = c_k β^{-e_k}, ln c_{k+1} = ℓ ln c_k - ln max_x x^{a}(1-x)^E, a = ℓ e_k
        let ctx = sub();
        let st = iterate_subcritical(&ctx, &grid(), 8).unwrap();
        let (l, e) = (ctx.iteration_ratio, ctx.gap_exponent());
        let mut ln_c = 0.0;
        for k in 1..=8 {
            let e_prev = if k == 1 { 0.0 } else { subcritical_exponent(&ctx, k - 1).unwrap() };
            let a = l * e_prev;
            let x = a / (a + e);
            let ln_m = if a == 0.0 { 0.0 } else { a * x.ln() } + e * (1.0 - x).ln();
            ln_c = l * ln_c - ln_m;
            let e_k = subcritical_exponent(&ctx, k).unwrap();
            for (i, &b) in grid().iter().enumerate() {
                assert_relative_eq!(st.ln_lambda(k)[i], ln_c - e_k * b.ln(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_exponents() {
        let ctx = sub();
        assert_relative_eq!(subcritical_exponent(&ctx, 1).unwrap(), 3.0, max_relative = 1e-14);
        assert_relative_eq!(subcritical_exponent(&ctx, 60).unwrap(), 6.0, max_relative = 1e-14);
        for k in [1, 5, 30] {
            assert_relative_eq!(subcritical_closed_form(&ctx, 2.0, k).unwrap(), 1.0);
        }
        assert_relative_eq!(subcritical_limit_bound(&ctx, 4.0).unwrap(), 0.015625, max_relative = 1e-14);
        assert!(subcritical_closed_form(&crit(), 2.0, 1).is_err());
    }

    #[test]
    fn infimum_below_half_step_and_chain_bound() {
        let st = iterate_subcritical(&sub(), &grid(), 10).unwrap();
        let rep = subcritical_sandwich(&st).unwrap();
        assert_eq!(rep.infimum_violations, 0);
        assert_eq!(rep.chain_violations, 0);
        assert_eq!(rep.checked, 2000);
    }

    #[test]
    fn closed_form_is_exceeded_from_the_third_step() {
        let st = iterate_subcritical(&sub(), &grid(), 4).unwrap();
        let rep = subcritical_sandwich(&st).unwrap();
        assert_eq!(rep.first_closed_form_violation.map(|v| v.0), Some(3));
    }

    #[test]
    fn grid_and_regime_checks() {
        assert!(iterate_subcritical(&crit(), &grid(), 3).is_err());
        assert!(iterate_critical(&sub(), &grid(), 3).is_err());
        assert!(iterate_subcritical(&sub(), &grid(), 61).is_err());
        assert!(iterate_subcritical(&sub(), &log_grid(1.0, 1e3, 50), 3).is_err());
    }

    #[test]
    fn critical_iteration_matches_closed_form() {
        let ctx = crit();
        let st = iterate_critical(&ctx, &grid(), 8).unwrap();
        for k in 1..=8 {
            for (i, &b) in grid().iter().enumerate() {
                let bound = critical_bound(&ctx, b, k).ln();
                assert!(st.ln_lambda(k)[i] <= bound + 1e-9 * bound.abs().max(1.0));
                assert_relative_eq!(st.ln_lambda(k)[i], bound, epsilon = 1e-8 * bound.abs().max(1.0));
            }
        }
        assert!(critical_optimizer_misses(&st).unwrap().is_empty());
    }

    #[test]
    fn critical_k1_at_two() {
        let ctx = crit();
        assert_relative_eq!(critical_bound(&ctx, 2.0, 1), 0.5f64.powf(3.0));
        let g = grid();
        let st = iterate_critical(&ctx, &g, 2).unwrap();
        let i = g.iter().position(|&b| b > 2.0).unwrap() - 1;
        let beta = g[i];
        assert_relative_eq!(st.argmin(1)[i], beta / 2.0, max_relative = 1e-6);
    }

    #[test]
    fn intervals() {
        let t = interval_table(200).unwrap();
        assert_eq!((t[0].left, t[0].right, t[0].length), (1.0, 4.0, 3.0));
        assert_relative_eq!(t[1].right, 6.75, max_relative = 1e-15);
        assert!(t.windows(2).all(|w| w[0].right == w[1].left));
        assert!(t.iter().all(|i| i.left < i.right && i.length <= 3.0));
        assert!((t[99].length - std::f64::consts::E).abs() <= 0.01 * std::f64::consts::E);
        assert!(interval_table(1).is_err());
        assert!(interval_length_limit(1_000_001).is_err());
    }

    #[test]
    fn envelope_argmin_structure() {
        let ctx = crit();
        assert_eq!(critical_envelope(&ctx, 0.5).unwrap(), Envelope { value: 1.0, argmin_k: 0 });
        for b in [1.0, 2.0, 3.99] {
            assert_eq!(critical_envelope(&ctx, b).unwrap().argmin_k, 1);
        }
        assert_eq!(critical_envelope(&ctx, 4.0).unwrap().argmin_k, 2);
        assert_eq!(critical_envelope(&ctx, 6.7).unwrap().argmin_k, 2);
        let at = critical_envelope(&ctx, 6.75).unwrap();
        assert_eq!(at.argmin_k, 3);
        assert_relative_eq!(critical_bound(&ctx, 6.75, 2), critical_bound(&ctx, 6.75, 3), max_relative = 1e-12);
        let mut last = 0;
        for b in log_grid(1.0, 1e4, 500) {
            let env = critical_envelope(&ctx, b).unwrap();
            assert!(env.argmin_k >= last);
            last = env.argmin_k;
            assert_relative_eq!(env.value, critical_bound(&ctx, b, env.argmin_k), max_relative = 1e-12);
        }
    }

    #[test]
    fn series_values() {
        let ctx = crit();
        let s1 = critical_series(&ctx, 1.0, 50).unwrap();
        let exact = 1.0 / (3f64.exp() - 1.0);
        assert!(s1.converged);
        assert_relative_eq!(*s1.partial_sums.last().unwrap(), exact, max_relative = 1e-12);
        let s2 = critical_series(&ctx, 2.0, 50).unwrap();
        assert!(s2.converged);
        let r = s2.terms[40] / s2.terms[39];
        assert_relative_eq!(r, (41.0 / 40.0) * (-3f64).exp(), max_relative = 1e-12);
        assert!((s2.terms[49] / s2.terms[48] - (-3f64).exp()).abs() < 0.03 * (-3f64).exp());
        assert!(critical_series(&sub(), 2.0, 50).is_err());
    }

    proptest! {
        #[test]
        fn interval_lengths_bounded(k in 1usize..1_000_000) {
            let i = CriticalInterval::new(k);
            prop_assert!(i.length <= 3.0 && i.length > 2.0);
            prop_assert!(i.left < i.right);
        }
    }
}
