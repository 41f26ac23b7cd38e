use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::output::{write_json, Cell, Table};
use super::{CliError, ExperimentConfig, Outcome, SourceSpec};
use crate::distribution::{distribution_function, height_grid, layer_cake_norm, lebesgue_norm};
use crate::exponents::{validate_context, ExponentContext, Regime};
use crate::iteration::{
    critical_bound, critical_envelope, critical_optimizer_misses, decay_exponent, iterate_critical,
    iterate_subcritical, subcritical_chain_bound_ln, subcritical_closed_form, subcritical_limit_bound,
    subcritical_sandwich, IterationState,
};
use crate::profile::{log_grid, RadialProfile};
use crate::radial::{flux_identity_defect, p_laplacian_residual, phi, phi_inverse, power_source_solution, solve_radial};
use crate::sharpness::{build_example, exponent_sweep, verify_example_pde};

const NORM_GAP_BOUND: f64 = 1e-4;
const EXAMPLE_BOUND: f64 = 1e-6;

fn prepare(cfg: &ExperimentConfig) -> Result<(ExponentContext, PathBuf), CliError> {
    let ctx = cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    Ok((ctx, cfg.output_dir.clone()))
}

fn ok(summary: Value) -> Outcome {
    Outcome {
        summary,
        failures: Vec::new(),
    }
}

pub fn context(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let ctx = validate_context(cfg.context.n, cfg.context.p, cfg.context.q)?;
    Ok(ok(serde_json::to_value(&ctx).map_err(|e| CliError::Numerics(e.to_string()))?))
}

struct Solved {
    f: RadialProfile,
    u: RadialProfile,
}

fn solve_source(cfg: &ExperimentConfig, ctx: &ExponentContext) -> Result<Solved, CliError> {
    let f = cfg.source_profile()?;
    let u = solve_radial(&f, ctx, &cfg.quadrature, cfg.grids.r_nodes)?;
    Ok(Solved { f, u })
}

fn closed_form(source: &SourceSpec, ctx: &ExponentContext) -> Option<RadialProfile> {
    match source {
        SourceSpec::Power { coefficient, exponent } => power_source_solution(*coefficient, *exponent, ctx),
        SourceSpec::Constant(v) => power_source_solution(*v, 0.0, ctx),
        SourceSpec::File(_) => None,
    }
}

pub fn solve(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (ctx, dir) = prepare(cfg)?;
    let Solved { f, u } = solve_source(cfg, &ctx)?;
    let nodes = u.as_sampled().expect("solver output is sampled");
    let floor = (10.0 * nodes.radii()[0]).max(crate::radial::RESIDUAL_WINDOW.0);
    let check: Vec<f64> = nodes
        .radii()
        .iter()
        .copied()
        .filter(|&r| r >= floor && r <= crate::radial::RESIDUAL_WINDOW.1)
        .collect();
    let residual = p_laplacian_residual(&u, &f, &ctx, &check)?;
    let flux_defect = flux_identity_defect(&u, &f, &ctx, &cfg.quadrature)?;
    let gap = closed_form(&cfg.source, &ctx).map(|exact| {
        nodes
            .radii()
            .iter()
            .zip(nodes.values())
            .filter(|(r, _)| **r <= 0.99)
            .map(|(&r, &v)| {
                let e = exact.value(r);
                if e == 0.0 {
                    v.abs()
                } else {
                    (v - e).abs() / e.abs()
                }
            })
            .fold(0.0, f64::max)
    });

    let mut table = Table::new(&["r", "u", "du"]);
    for ((&r, &v), &d) in nodes.radii().iter().zip(nodes.values()).zip(nodes.derivatives()) {
        table.push(vec![r.into(), v.into(), d.into()]);
    }
    table.write(&dir.join("solution.csv"), cfg)?;
    let summary = json!({
        "nodes": nodes.radii().len(),
        "residual_max": residual,
        "residual_bound": cfg.residual_bound,
        "flux_identity_defect": flux_defect,
        "closed_form_gap": gap,
        "singular_at_origin": u.singular_at_origin,
    });
    write_json(&dir.join("residual.json"), &summary)?;
    let mut failures = Vec::new();
    if !(residual <= cfg.residual_bound) {
        failures.push(format!("residual {residual} exceeds {}", cfg.residual_bound));
    }
    Ok(Outcome { summary, failures })
}

pub fn analyze(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (ctx, dir) = prepare(cfg)?;
    let Solved { u, .. } = solve_source(cfg, &ctx)?;
    let heights = height_grid(&u, &ctx, cfg.grids.height_nodes, None)?;
    let curve = distribution_function(&u, &heights, &ctx)?;
    let mut table = Table::new(&["alpha", "lambda"]);
    for (&a, &m) in curve.heights().iter().zip(curve.measures()) {
        table.push(vec![a.into(), m.into()]);
    }
    table.write(&dir.join("distribution.csv"), cfg)?;

    let mut norms = Table::new(&["r_exp", "direct", "layer_cake", "relative_gap", "status"]);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &r in &cfg.r_exps {
        let direct = lebesgue_norm(&u, r, &ctx, &cfg.quadrature)?.finite();
        let cake = layer_cake_norm(&curve, r).ok();
        let (gap, status) = match (direct, cake) {
            (Some(d), Some(c)) => {
                let g = (c - d).abs() / d.abs().max(f64::MIN_POSITIVE);
                (Some(g), if g <= NORM_GAP_BOUND { "ok" } else { "mismatch" })
            }
            (None, None) => (None, "divergent"),
            _ => (None, "inconsistent"),
        };
        if status == "mismatch" || status == "inconsistent" {
            failures.push(format!("r_exp {r}: {status}"));
        }
        norms.push(vec![r.into(), direct.into(), cake.into(), gap.into(), status.into()]);
        rows.push(json!({"r_exp": r, "direct": direct, "layer_cake": cake, "relative_gap": gap, "status": status}));
    }
    norms.write(&dir.join("norms.csv"), cfg)?;
    Ok(Outcome {
        summary: json!({ "heights": heights.len(), "norms": rows }),
        failures,
    })
}

fn iteration_csv(
    state: &IterationState,
    k: usize,
    path: &Path,
    cfg: &ExperimentConfig,
) -> Result<(), CliError> {
    let ctx = &state.ctx;
    let mut table = Table::new(&["beta", "lambda_k", "closed_form_k", "corrected_bound_k", "envelope"]);
    let lambda = state.lambda(k);
    for (&b, &l) in state.beta_grid().iter().zip(&lambda) {
        let row: Vec<Cell> = match ctx.regime {
            Regime::Subcritical => {
                let closed = (k > 0).then(|| subcritical_closed_form(ctx, b, k)).transpose()?;
                let chain = (k > 0).then(|| subcritical_chain_bound_ln(ctx, b, k)).transpose()?.map(f64::exp);
                let env = subcritical_limit_bound(ctx, b)?.min(1.0);
                vec![b.into(), l.into(), closed.into(), chain.into(), env.into()]
            }
            _ => {
                let closed = critical_bound(ctx, b, k);
                let env = critical_envelope(ctx, b)?.value;
                vec![b.into(), l.into(), closed.into(), closed.into(), env.into()]
            }
        };
        table.push(row);
    }
    table.write(path, cfg)
}

pub fn iterate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (ctx, dir) = prepare(cfg)?;
    let grid = log_grid(0.1, 1e3, cfg.grids.beta_nodes);
    let (state, summary, failures) = match ctx.regime {
        Regime::Subcritical => {
            let k = cfg.iterations.unwrap_or(30);
            let state = iterate_subcritical(&ctx, &grid, k)?;
            let rep = subcritical_sandwich(&state)?;
            let decay = decay_exponent(&state, k);
            let limit = ctx.sharp_exponent.unwrap_or(f64::NAN);
            let mut failures = Vec::new();
            if rep.corrected_violations() > 0 {
                failures.push(format!("{} corrected sandwich violations", rep.corrected_violations()));
            }
            let summary = json!({
                "regime": ctx.regime,
                "context": ctx,
                "iterations": k,
                "checked_points": rep.checked,
                "sandwich_violations": rep.literal_violations(),
                "infimum_violations": rep.infimum_violations,
                "closed_form_violations": rep.closed_form_violations,
                "first_closed_form_violation": rep.first_closed_form_violation,
                "worst_closed_form_log_excess": rep.worst_closed_form_log_excess,
                "corrected_sandwich_violations": rep.corrected_violations(),
                "decay_exponent": decay,
                "limit_exponent": limit,
                "decay_exponent_relative_gap": ((decay - limit) / limit).abs(),
            });
            (state, summary, failures)
        }
        Regime::Critical => {
            let k = cfg.iterations.unwrap_or(50);
            let state = iterate_critical(&ctx, &grid, k)?;
            let misses = critical_optimizer_misses(&state)?;
            let mut bound_violations = 0usize;
            for j in 1..=k {
                for (&b, &l) in grid.iter().zip(state.ln_lambda(j)) {
                    let bound = critical_bound(&ctx, b, j).ln();
                    if l > bound + 1e-9 * bound.abs().max(1.0) {
                        bound_violations += 1;
                    }
                }
            }
            let mut failures = Vec::new();
            if !misses.is_empty() || bound_violations > 0 {
                failures.push(format!(
                    "{} optimizer misses, {bound_violations} bound violations",
                    misses.len()
                ));
            }
            let summary = json!({
                "regime": ctx.regime,
                "context": ctx,
                "iterations": k,
                "sandwich_violations": bound_violations,
                "optimizer_misses": misses.len(),
            });
            (state, summary, failures)
        }
        Regime::Supercritical => {
            return Err(CliError::Validation(
                "no distribution recursion for a supercritical context".into(),
            ))
        }
    };
    for k in 0..=state.k_max {
        iteration_csv(&state, k, &dir.join(format!("iteration_k{k:02}.csv")), cfg)?;
    }
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(Outcome { summary, failures })
}

pub fn sharpness(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (ctx, dir) = prepare(cfg)?;
    let example = build_example(&ctx, cfg.epsilon)?;
    let pde = verify_example_pde(&example, &log_grid(0.01, 0.99, 200), &cfg.quadrature)?;
    let table = exponent_sweep(&ctx, cfg.epsilon, &cfg.r_grid, &cfg.quadrature)?;
    let mut csv = Table::new(&["r_exp", "classification", "finite", "norm", "bound_ratio"]);
    for row in &table.rows {
        let class = serde_json::to_value(row.classification).map_err(|e| CliError::Numerics(e.to_string()))?;
        let label = class.get("kind").and_then(Value::as_str).unwrap_or("unknown").to_string();
        csv.push(vec![
            row.r_exp.into(),
            Cell::Text(label),
            row.finite.into(),
            row.norm.into(),
            row.bound_ratio.into(),
        ]);
    }
    csv.write(&dir.join("sweep.csv"), cfg)?;
    let summary = json!({
        "threshold": table.threshold,
        "sharp_exponent": table.sharp_exponent,
        "empirical_cutoff": table.empirical_cutoff,
        "resolution": table.resolution,
        "within_resolution": table.within_resolution,
        "residual_max": pde.residual,
        "solver_gap": pde.solver_gap,
        "source_norm": example.source_norm(),
    });
    write_json(&dir.join("verdict.json"), &summary)?;
    let mut failures = Vec::new();
    if !table.within_resolution {
        failures.push("empirical cutoff is not within grid resolution of the threshold".into());
    }
    if !(pde.residual <= EXAMPLE_BOUND && pde.solver_gap <= EXAMPLE_BOUND) {
        failures.push(format!("example residual {} / solver gap {}", pde.residual, pde.solver_gap));
    }
    Ok(Outcome { summary, failures })
}

/// Seeded checks over random admissible contexts: both routes to the sharp
/// exponent and the flux-map round trip.
fn property_sweep(seed: u64, samples: usize) -> Result<Value, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exponent_gap: f64 = 0.0;
    let mut round_trip: f64 = 0.0;
    for _ in 0..samples {
        let n: u32 = rng.gen_range(3..=8);
        let nf = f64::from(n);
        let p = rng.gen_range(1.05..nf - 0.05);
        let q = rng.gen_range(1.0001..nf / p + 1.0);
        let ctx = validate_context(n, p, q)?;
        if let (Some(a), Some(b)) = (ctx.sharp_exponent, ctx.sharp_exponent_from_series()) {
            exponent_gap = exponent_gap.max(((a - b) / a).abs());
        }
        let t: f64 = rng.gen_range(-1e3..1e3);
        if t != 0.0 {
            let back = phi_inverse(phi(t, p)?, p)?;
            round_trip = round_trip.max(((back - t) / t).abs());
        }
    }
    Ok(json!({
        "seed": seed,
        "samples": samples,
        "sharp_exponent_route_gap": exponent_gap,
        "flux_map_round_trip": round_trip,
    }))
}

pub fn report(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (ctx, dir) = prepare(cfg)?;
    let mut sections = serde_json::Map::new();
    let mut failures = Vec::new();
    let context_summary = context(cfg)?.summary;
    write_json(&dir.join("context.json"), &context_summary)?;
    sections.insert("context".into(), context_summary);

    let mut run = |name: &str, f: fn(&ExperimentConfig) -> Result<Outcome, CliError>| -> Result<(), CliError> {
        let out = f(cfg)?;
        failures.extend(out.failures.iter().map(|m| format!("{name}: {m}")));
        sections.insert(name.into(), out.summary);
        Ok(())
    };
    run("solve", solve)?;
    run("analyze", analyze)?;
    if ctx.regime != Regime::Supercritical {
        run("iterate", iterate)?;
    }
    if ctx.regime == Regime::Subcritical {
        run("sharpness", sharpness)?;
    }
    sections.insert("properties".into(), property_sweep(cfg.seed, 256)?);
    sections.insert("failures".into(), json!(failures));
    let summary = Value::Object(sections);
    write_json(&dir.join("report.json"), &summary)?;
    Ok(Outcome { summary, failures })
}
