//! Adaptive Gauss–Kronrod (7/15) quadrature and the origin-split radial
//! integrator used throughout the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and limits shared by every integral in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Smallest radius resolved numerically; below it a power-law model is used.
    pub origin_cutoff: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-300,
            rel_tol: 1e-12,
            max_subdivisions: 4000,
            origin_cutoff: 1e-8,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid("abs_tol", self.abs_tol, "must be positive"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol", self.rel_tol, "must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::invalid("max_subdivisions", 0.0, "must be positive"));
        }
        if !(self.origin_cutoff > 0.0 && self.origin_cutoff <= 1e-3) {
            return Err(Error::invalid(
                "origin_cutoff",
                self.origin_cutoff,
                "must lie in (0, 1e-3]",
            ));
        }
        Ok(())
    }

    pub fn with_cutoff(mut self, origin_cutoff: f64) -> Self {
        self.origin_cutoff = origin_cutoff;
        self
    }
}

// Kronrod abscissae, descending; odd indices are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    lower: f64,
    upper: f64,
    value: f64,
    error: f64,
    magnitude: f64,
}

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, lower: f64, upper: f64) -> Panel {
    let center = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut magnitude = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        magnitude += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Panel {
        lower,
        upper,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
        magnitude: magnitude * half.abs(),
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive Gauss–Kronrod integration of `f` over `[lower, upper]`, bisecting the
/// panel with the largest error estimate until the global estimate meets the
/// configured tolerance. `breakpoints` seed the initial partition.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Integral> {
    if !(lower.is_finite() && upper.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "integration bounds must be finite, got [{lower}, {upper}]"
        )));
    }
    if lower == upper {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (a, b, sign) = if lower < upper {
        (lower, upper, 1.0)
    } else {
        (upper, lower, -1.0)
    };

    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(breakpoints.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut panels: Vec<Panel> = cuts
        .windows(2)
        .map(|w| kronrod_panel(&f, w[0], w[1]))
        .collect();
    let mut evaluations = 15 * panels.len();

    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let magnitude: f64 = panels.iter().map(|p| p.magnitude).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature {
                lower: a,
                upper: b,
                estimate: value,
                error,
            });
        }
        let tolerance = cfg
            .abs_tol
            .max(cfg.rel_tol * value.abs())
            .max(50.0 * f64::EPSILON * magnitude);
        if error <= tolerance {
            return Ok(Integral {
                value: sign * value,
                error,
                evaluations,
            });
        }
        if panels.len() >= cfg.max_subdivisions {
            return Err(Error::Quadrature {
                lower: a,
                upper: b,
                estimate: sign * value,
                error,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one panel");
        let panel = panels.swap_remove(worst);
        let mid = 0.5 * (panel.lower + panel.upper);
        if mid <= panel.lower || mid >= panel.upper {
            // Panel can no longer be split in floating point.
            return Err(Error::Quadrature {
                lower: a,
                upper: b,
                estimate: sign * value,
                error,
            });
        }
        panels.push(kronrod_panel(&f, panel.lower, mid));
        panels.push(kronrod_panel(&f, mid, panel.upper));
        evaluations += 30;
    }
}

/// `∫_lower^upper g(ρ) dρ` for `0 < lower < upper`, evaluated in the variable
/// `t = ln ρ` with a breakpoint at every decade. Power-law integrands become
/// exponentials in `t`, which Gauss–Kronrod resolves uniformly across decades.
pub fn integrate_log_radial<G: Fn(f64) -> f64>(
    g: G,
    lower: f64,
    upper: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(lower > 0.0 && upper > 0.0) {
        return Err(Error::InvalidInput(format!(
            "radial integration needs positive bounds, got [{lower}, {upper}]"
        )));
    }
    if lower == upper {
        return Ok(0.0);
    }
    let (t0, t1) = (lower.ln(), upper.ln());
    let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
    let decade = std::f64::consts::LN_10;
    let mut breaks = Vec::new();
    let mut t = (lo / decade).ceil() * decade;
    while t < hi {
        breaks.push(t);
        t += decade;
    }
    let integrand = |t: f64| {
        let r = t.exp();
        g(r) * r
    };
    Ok(integrate(integrand, t0, t1, &breaks, cfg)?.value)
}

/// `∫_0^cutoff c ρ^e dρ` for the power law through `(cutoff, value)`;
/// `None` when `e <= -1`, i.e. the model is not integrable at the origin.
pub fn power_tail(value: f64, cutoff: f64, exponent: f64) -> Option<f64> {
    if value == 0.0 {
        return Some(0.0);
    }
    (exponent > -1.0).then(|| value * cutoff / (exponent + 1.0))
}

/// `∫_0^c ρ^m |a (ρ^s + k)|^R dρ`, exactly, by expanding the affine factor in a
/// binomial series about its dominant term. Returns `None` if the leading power
/// is not integrable. Requires `c` small enough that the subdominant ratio is
/// below one half.
pub fn power_affine_tail(
    coefficient: f64,
    exponent: f64,
    offset: f64,
    power: f64,
    weight_exponent: f64,
    cutoff: f64,
) -> Option<f64> {
    let (a, s, k, big_r, m, c) = (coefficient, exponent, offset, power, weight_exponent, cutoff);
    if a == 0.0 {
        return Some(0.0);
    }
    // |a(ρ^s + k)|^R = |a|^R |lead|^R |1 + x|^R with x = other/lead.
    // (dominant power, constant, ratio exponent, ratio coefficient)
    let (lead_pow, lead_coef, ratio_pow, ratio_coef) = if s < 0.0 {
        (s, 1.0, -s, k)
    } else if s > 0.0 && k != 0.0 {
        (0.0, k, s, 1.0 / k)
    } else if s == 0.0 {
        (0.0, 1.0 + k, 0.0, 0.0)
    } else {
        // s > 0, k == 0: pure power.
        (s, 1.0, 0.0, 0.0)
    };
    if lead_coef == 0.0 {
        return Some(0.0);
    }
    let x_at_cutoff = (ratio_coef * c.powf(ratio_pow)).abs();
    if ratio_pow > 0.0 && x_at_cutoff > 0.5 {
        return None;
    }
    let prefactor = (a * lead_coef).abs().powf(big_r);
    let mut total = 0.0;
    let mut binom = 1.0;
    let mut ratio_term = 1.0;
    for j in 0..200 {
        let jf = f64::from(j);
        let e = lead_pow * big_r + m + jf * ratio_pow;
        if j == 0 && e <= -1.0 {
            return None;
        }
        let term = binom * ratio_term * c.powf(e + 1.0) / (e + 1.0);
        total += term;
        if ratio_pow == 0.0 || term.abs() <= 1e-17 * total.abs() {
            break;
        }
        binom *= (big_r - jf) / (jf + 1.0);
        ratio_term *= ratio_coef;
        if binom == 0.0 {
            break;
        }
    }
    Some(prefactor * total)
}
