//! Parameter validation and the derived exponents of the p-Poisson problem
//! `-div(|∇u|^{p-2} ∇u) = f` on the unit ball of `R^n` with `f ∈ L^q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for deciding `q = n/p`.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

/// Integrability regime of the source exponent relative to `n/p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Raw `(n, p, q)` triple as read from JSON or the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextParams {
    pub n: u32,
    pub p: f64,
    pub q: f64,
}

/// Validated parameters together with every exponent derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ContextParams")]
pub struct ExponentContext {
    pub n: u32,
    pub p: f64,
    pub q: f64,
    /// `np/(n-p)`
    pub sobolev_conjugate: f64,
    /// `(q-1)n / (q(n-p))`, exactly 1 in the critical regime.
    pub iteration_ratio: f64,
    /// `(p-1)qn/(n-pq)`; `None` outside the subcritical regime.
    pub sharp_exponent: Option<f64>,
    /// `np/(np-n+p)`
    pub duality_floor: f64,
    pub regime: Regime,
    /// Volume of the unit n-ball.
    pub ambient_measure: f64,
    /// Area of the unit sphere, `n * ambient_measure`.
    pub sphere_area: f64,
    /// Set when `q` lies below the duality floor; the radial constructions
    /// still make sense but the weak pairing `∫ f φ` is not guaranteed.
    pub below_duality_floor: bool,
}

impl TryFrom<ContextParams> for ExponentContext {
    type Error = Error;

    fn try_from(params: ContextParams) -> Result<Self> {
        ExponentContext::new(params.n, params.p, params.q)
    }
}

impl ExponentContext {
    pub fn new(n: u32, p: f64, q: f64) -> Result<Self> {
        validate_context(n, p, q)
    }

    pub fn params(&self) -> ContextParams {
        ContextParams {
            n: self.n,
            p: self.p,
            q: self.q,
        }
    }

    pub fn dim(&self) -> f64 {
        f64::from(self.n)
    }

    /// `(p-1) n/(n-p)`, the power of `1/(β-α)` in the distribution recursion.
    pub fn gap_exponent(&self) -> f64 {
        let n = self.dim();
        (self.p - 1.0) * n / (n - self.p)
    }

    /// `(p-1) q/(q-1)`, the prefactor of the geometric exponent series.
    pub fn series_prefactor(&self) -> f64 {
        (self.p - 1.0) * self.q / (self.q - 1.0)
    }

    /// Sharp exponent recovered from the limit of the geometric series,
    /// `(p-1)q/(q-1) * ℓ/(1-ℓ)`. Only meaningful when `ℓ < 1`.
    pub fn sharp_exponent_from_series(&self) -> Option<f64> {
        let l = self.iteration_ratio;
        (self.regime == Regime::Subcritical).then(|| self.series_prefactor() * l / (1.0 - l))
    }

    /// Sharp exponent with the critical regime mapped to `+∞`.
    pub fn sharp_exponent_or_infinity(&self) -> f64 {
        match self.regime {
            Regime::Subcritical => self.sharp_exponent.unwrap_or(f64::NAN),
            Regime::Critical => f64::INFINITY,
            Regime::Supercritical => f64::NAN,
        }
    }

    pub fn require(&self, expected: Regime) -> Result<()> {
        if self.regime == expected {
            Ok(())
        } else {
            Err(Error::RegimeMismatch {
                expected,
                found: self.regime,
            })
        }
    }
}

pub fn validate_context(n: u32, p: f64, q: f64) -> Result<ExponentContext> {
    if !p.is_finite() {
        return Err(Error::invalid("p", p, "must be finite"));
    }
    if !q.is_finite() {
        return Err(Error::invalid("q", q, "must be finite"));
    }
    if n < 3 {
        return Err(Error::invalid("n", f64::from(n), "n >= 3"));
    }
    let nf = f64::from(n);
    if p <= 1.0 {
        return Err(Error::invalid("p", p, "1 < p < n"));
    }
    if p >= nf {
        return Err(Error::invalid("p", p, "1 < p < n"));
    }
    if q <= 1.0 {
        return Err(Error::invalid("q", q, "q > 1"));
    }

    let critical_q = nf / p;
    let regime = if (q - critical_q).abs() <= CRITICAL_TOLERANCE * critical_q {
        Regime::Critical
    } else if q < critical_q {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    };

    let iteration_ratio = match regime {
        Regime::Critical => 1.0,
        _ => (q - 1.0) * nf / (q * (nf - p)),
    };
    let sharp_exponent =
        (regime == Regime::Subcritical).then(|| (p - 1.0) * q * nf / (nf - p * q));
    let duality_floor = nf * p / (nf * p - nf + p);
    let ambient_measure = unit_ball_volume(n);

    Ok(ExponentContext {
        n,
        p,
        q,
        sobolev_conjugate: nf * p / (nf - p),
        iteration_ratio,
        sharp_exponent,
        duality_floor,
        regime,
        ambient_measure,
        sphere_area: nf * ambient_measure,
        below_duality_floor: q < duality_floor,
    })
}

/// `π^{n/2} / Γ(n/2 + 1)`, with the gamma factor evaluated by the exact
/// half-integer recursion.
pub fn unit_ball_volume(n: u32) -> f64 {
    let pi = std::f64::consts::PI;
    // Γ(n/2 + 1) = (n/2)(n/2 - 1)...(1 or 1/2) * (1 or √π)
    let mut gamma = if n % 2 == 0 { 1.0 } else { pi.sqrt() };
    let mut x = f64::from(n) / 2.0;
    while x > 0.0 {
        gamma *= x;
        x -= 1.0;
    }
    pi.powf(f64::from(n) / 2.0) / gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn subcritical_reference_triple() {
        let ctx = validate_context(3, 2.0, 1.2).unwrap();
        assert_eq!(ctx.regime, Regime::Subcritical);
        // (p-1)qn/(n-pq) = 1.2*3/0.6
        assert_relative_eq!(ctx.sharp_exponent.unwrap(), 6.0, max_relative = 1e-14);
        assert_relative_eq!(ctx.iteration_ratio, 0.5, max_relative = 1e-14);
        assert_relative_eq!(ctx.sobolev_conjugate, 6.0, max_relative = 1e-14);
        assert_relative_eq!(ctx.duality_floor, 1.2, max_relative = 1e-14);
        assert!(!ctx.below_duality_floor);
    }

    #[test]
    fn critical_triple() {
        let ctx = validate_context(3, 2.0, 1.5).unwrap();
        assert_eq!(ctx.regime, Regime::Critical);
        assert_eq!(ctx.sharp_exponent, None);
        assert_eq!(ctx.iteration_ratio, 1.0);
        assert!(ctx.sharp_exponent_or_infinity().is_infinite());
    }

    #[test]
    fn supercritical_triple() {
        let ctx = validate_context(3, 2.0, 4.0).unwrap();
        assert_eq!(ctx.regime, Regime::Supercritical);
        assert!(ctx.iteration_ratio > 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            validate_context(3, 3.0, 2.0),
            Err(Error::InvalidParameter { name: "p", .. })
        ));
        assert!(validate_context(2, 1.5, 2.0).is_err());
        assert!(validate_context(3, 1.0, 2.0).is_err());
        assert!(validate_context(3, 2.0, 1.0).is_err());
        assert!(validate_context(3, f64::NAN, 2.0).is_err());
        assert!(validate_context(3, 2.0, f64::INFINITY).is_err());
    }

    #[test]
    fn low_q_is_flagged_not_rejected() {
        let ctx = validate_context(3, 2.0, 1.1).unwrap();
        assert!(ctx.below_duality_floor);
    }

    #[test]
    fn ball_volumes() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(unit_ball_volume(3), 4.0 * pi / 3.0, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(4), pi * pi / 2.0, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(5), 8.0 * pi * pi / 15.0, max_relative = 1e-15);
        let ctx = validate_context(5, 2.0, 1.5).unwrap();
        assert_relative_eq!(ctx.sphere_area, 5.0 * ctx.ambient_measure, max_relative = 1e-15);
    }

    #[test]
    fn sharp_exponent_increases_in_q() {
        let (n, p) = (3u32, 2.0);
        let qc = f64::from(n) / p;
        let values: Vec<f64> = (1..=100)
            .map(|i| 1.0 + (qc - 1.0) * f64::from(i) / 101.0)
            .map(|q| validate_context(n, p, q).unwrap().sharp_exponent.unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn sharp_exponent_blows_up_at_critical_q() {
        let (n, p) = (4u32, 2.5);
        let qc = f64::from(n) / p;
        let mut last = 0.0;
        for k in 1..=6 {
            let q = qc - 10f64.powi(-k);
            let r = validate_context(n, p, q).unwrap().sharp_exponent.unwrap();
            assert!(r > last);
            assert!(r > 10f64.powi(k - 1));
            last = r;
        }
    }

    #[test]
    fn json_round_trip_recomputes_fields() {
        let ctx: ExponentContext = serde_json::from_str(r#"{"n":3,"p":2.0,"q":1.2}"#).unwrap();
        let text = serde_json::to_string(&ctx).unwrap();
        let back: ExponentContext = serde_json::from_str(&text).unwrap();
        assert_eq!(ctx, back);
        assert!(serde_json::from_str::<ExponentContext>(r#"{"n":3,"p":3.0,"q":1.2}"#).is_err());
    }

    fn valid_triple() -> impl Strategy<Value = (u32, f64, f64)> {
        (3u32..9).prop_flat_map(|n| {
            let nf = f64::from(n);
            (Just(n), 1.05..nf - 0.05).prop_flat_map(move |(n, p)| {
                (Just(n), Just(p), 1.0001..(2.0 * nf / p))
            })
        })
    }

    proptest! {
        #[test]
        fn both_sharp_exponent_routes_agree((n, p, q) in valid_triple()) {
            let ctx = validate_context(n, p, q).unwrap();
            if let (Some(direct), Some(series)) = (ctx.sharp_exponent, ctx.sharp_exponent_from_series()) {
                prop_assert!(direct > 0.0);
                prop_assert!(((direct - series) / direct).abs() <= 1e-12);
            }
        }

        #[test]
        fn ratio_below_one_iff_subcritical((n, p, q) in valid_triple()) {
            let ctx = validate_context(n, p, q).unwrap();
            let qc = f64::from(n) / p;
            match ctx.regime {
                Regime::Subcritical => prop_assert!(ctx.iteration_ratio < 1.0 && q < qc),
                Regime::Critical => prop_assert!(ctx.iteration_ratio == 1.0),
                Regime::Supercritical => prop_assert!(ctx.iteration_ratio > 1.0 && q > qc),
            }
        }
    }
}
