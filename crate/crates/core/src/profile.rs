//! Radial functions on `(0, 1]`: closed-form power-affine laws and sampled grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum node count of a sampled profile.
pub const MIN_SAMPLED_NODES: usize = 64;

/// Local log-log slope `r u'(r) / u(r)` below which a profile counts as blowing
/// up at the origin.
const SINGULAR_SLOPE: f64 = -1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProfileForm {
    /// `r ↦ coefficient * (r^exponent + offset)`
    PowerLawAffine {
        coefficient: f64,
        exponent: f64,
        offset: f64,
    },
    Sampled(SampledProfile),
}

/// Strictly increasing radii in `(0, 1]` with values and first derivatives.
///
/// Between nodes the profile is the cubic Hermite interpolant in `r`. When the
/// derivatives are not supplied they are filled in with Fritsch–Carlson slopes,
/// which keeps the interpolant monotone wherever the data are. Below the first
/// node the profile continues as the power law matching value and slope there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledProfile {
    radii: Vec<f64>,
    values: Vec<f64>,
    derivatives: Vec<f64>,
    exact_derivatives: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    second_derivatives: Option<Vec<f64>>,
}

impl SampledProfile {
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivatives
    }

    /// True when derivatives came with the data rather than from the slope filter.
    pub fn has_exact_derivatives(&self) -> bool {
        self.exact_derivatives
    }

    pub fn second_derivatives(&self) -> Option<&[f64]> {
        self.second_derivatives.as_deref()
    }

    fn cell(&self, r: f64) -> usize {
        let idx = self.radii.partition_point(|&x| x <= r);
        idx.saturating_sub(1).min(self.radii.len() - 2)
    }

    /// Exponent of the power law continuing the profile below the first node.
    fn origin_slope(&self) -> f64 {
        let (r0, v0, d0) = (self.radii[0], self.values[0], self.derivatives[0]);
        if v0 == 0.0 {
            0.0
        } else {
            r0 * d0 / v0
        }
    }

    fn value(&self, r: f64) -> f64 {
        let r0 = self.radii[0];
        if r < r0 {
            return self.values[0] * (r / r0).powf(self.origin_slope());
        }
        let i = self.cell(r);
        let (x0, x1) = (self.radii[i], self.radii[i + 1]);
        let h = x1 - x0;
        let t = ((r - x0) / h).min(1.0);
        hermite(t, h, self.values[i], self.derivatives[i], self.values[i + 1], self.derivatives[i + 1])
    }

    fn derivative(&self, r: f64) -> f64 {
        let r0 = self.radii[0];
        if r < r0 {
            let slope = self.origin_slope();
            return self.values[0] * slope * (r / r0).powf(slope) / r;
        }
        let i = self.cell(r);
        let (x0, x1) = (self.radii[i], self.radii[i + 1]);
        let h = x1 - x0;
        let t = ((r - x0) / h).min(1.0);
        if let Some(second) = &self.second_derivatives {
            // Interpolate u' from (u', u'') so no value differences enter.
            return hermite(t, h, self.derivatives[i], second[i], self.derivatives[i + 1], second[i + 1]);
        }
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.values[i] + d01 * self.values[i + 1]) / h
            + d10 * self.derivatives[i]
            + d11 * self.derivatives[i + 1]
    }
}

fn hermite(t: f64, h: f64, y0: f64, m0: f64, y1: f64, m1: f64) -> f64 {
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1
}

/// Fritsch–Carlson monotone slopes for the nodes `(x, y)`.
fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secants: Vec<f64> = (0..n - 1)
        .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = secants[0];
    m[n - 1] = secants[n - 2];
    for i in 1..n - 1 {
        m[i] = if secants[i - 1] * secants[i] <= 0.0 {
            0.0
        } else {
            0.5 * (secants[i - 1] + secants[i])
        };
    }
    for i in 0..n - 1 {
        let d = secants[i];
        if d == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / d;
        let b = m[i + 1] / d;
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[i] = tau * a * d;
            m[i + 1] = tau * b * d;
        }
    }
    m
}

/// A radial function on `(0, 1]` with its value at the boundary sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub form: ProfileForm,
    pub singular_at_origin: bool,
    pub boundary_value: f64,
}

impl RadialProfile {
    pub fn power_law_affine(coefficient: f64, exponent: f64, offset: f64) -> Self {
        let singular_at_origin = coefficient != 0.0 && exponent < 0.0;
        Self {
            form: ProfileForm::PowerLawAffine {
                coefficient,
                exponent,
                offset,
            },
            singular_at_origin,
            boundary_value: coefficient * (1.0 + offset),
        }
    }

    /// `coefficient * r^exponent`
    pub fn power(coefficient: f64, exponent: f64) -> Self {
        Self::power_law_affine(coefficient, exponent, 0.0)
    }

    pub fn constant(value: f64) -> Self {
        Self::power_law_affine(value, 0.0, 0.0)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Builds a sampled profile; `derivatives` are trusted when given and
    /// otherwise replaced by monotone slopes.
    pub fn sampled(radii: Vec<f64>, values: Vec<f64>, derivatives: Option<Vec<f64>>) -> Result<Self> {
        if radii.len() < MIN_SAMPLED_NODES {
            return Err(Error::InvalidInput(format!(
                "sampled profile needs at least {MIN_SAMPLED_NODES} nodes, got {}",
                radii.len()
            )));
        }
        if values.len() != radii.len() {
            return Err(Error::InvalidInput(format!(
                "{} radii but {} values",
                radii.len(),
                values.len()
            )));
        }
        if let Some(d) = &derivatives {
            if d.len() != radii.len() {
                return Err(Error::InvalidInput(format!(
                    "{} radii but {} derivatives",
                    radii.len(),
                    d.len()
                )));
            }
        }
        if let Some(bad) = radii.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::InvalidInput(format!("radius {bad} outside (0, 1]")));
        }
        if let Some(w) = radii.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "radii must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if values.iter().chain(derivatives.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("profile data must be finite".into()));
        }
        let exact_derivatives = derivatives.is_some();
        let derivatives = derivatives.unwrap_or_else(|| monotone_slopes(&radii, &values));
        let sampled = SampledProfile {
            radii,
            values,
            derivatives,
            exact_derivatives,
            second_derivatives: None,
        };
        let singular_at_origin = sampled.origin_slope() < SINGULAR_SLOPE;
        let boundary_value = sampled.value(1.0);
        Ok(Self {
            form: ProfileForm::Sampled(sampled),
            singular_at_origin,
            boundary_value,
        })
    }

    /// Attaches second derivatives to a sampled profile; the first derivative is
    /// then interpolated from `(u', u'')` instead of from the values.
    pub fn with_second_derivatives(mut self, second: Vec<f64>) -> Result<Self> {
        match &mut self.form {
            ProfileForm::Sampled(s) => {
                if second.len() != s.radii.len() || second.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(
                        "second derivatives must be finite and match the grid".into(),
                    ));
                }
                s.second_derivatives = Some(second);
                Ok(self)
            }
            ProfileForm::PowerLawAffine { .. } => Err(Error::InvalidInput(
                "second derivatives only apply to sampled profiles".into(),
            )),
        }
    }

    pub fn as_sampled(&self) -> Option<&SampledProfile> {
        match &self.form {
            ProfileForm::Sampled(s) => Some(s),
            ProfileForm::PowerLawAffine { .. } => None,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match &self.form {
            ProfileForm::PowerLawAffine {
                coefficient,
                exponent,
                offset,
            } => {
                if *coefficient == 0.0 {
                    0.0
                } else {
                    coefficient * (r.powf(*exponent) + offset)
                }
            }
            ProfileForm::Sampled(s) => s.value(r),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match &self.form {
            ProfileForm::PowerLawAffine {
                coefficient,
                exponent,
                ..
            } => {
                if *coefficient == 0.0 || *exponent == 0.0 {
                    0.0
                } else {
                    coefficient * exponent * r.powf(exponent - 1.0)
                }
            }
            ProfileForm::Sampled(s) => s.derivative(r),
        }
    }

    /// `r ↦ t * u(r)`
    pub fn scaled(&self, t: f64) -> Self {
        match &self.form {
            ProfileForm::PowerLawAffine {
                coefficient,
                exponent,
                offset,
            } => Self::power_law_affine(t * coefficient, *exponent, *offset),
            ProfileForm::Sampled(s) => Self {
                form: ProfileForm::Sampled(SampledProfile {
                    radii: s.radii.clone(),
                    values: s.values.iter().map(|v| t * v).collect(),
                    derivatives: s.derivatives.iter().map(|v| t * v).collect(),
                    exact_derivatives: s.exact_derivatives,
                    second_derivatives: s
                        .second_derivatives
                        .as_ref()
                        .map(|d| d.iter().map(|v| t * v).collect()),
                }),
                singular_at_origin: self.singular_at_origin,
                boundary_value: t * self.boundary_value,
            },
        }
    }

    /// Smallest radius at which the profile carries data; zero for closed forms.
    pub fn data_floor(&self) -> f64 {
        self.as_sampled().map_or(0.0, |s| s.radii[0])
    }

    /// Sample points covering `[floor, 1]` for scans: the profile's own nodes
    /// when sampled, otherwise `count` log-spaced radii.
    pub fn scan_radii(&self, floor: f64, count: usize) -> Vec<f64> {
        match &self.form {
            ProfileForm::Sampled(s) => s.radii.iter().copied().filter(|&r| r >= floor).collect(),
            ProfileForm::PowerLawAffine { .. } => log_grid(floor, 1.0, count),
        }
    }
}

/// `count` log-spaced points from `start` to `end` inclusive.
pub fn log_grid(start: f64, end: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && start > 0.0 && end > start);
    let (a, b) = (start.ln(), end.ln());
    let last = (count - 1) as f64;
    (0..count)
        .map(|i| match i {
            0 => start,
            i if i == count - 1 => end,
            i => (a + (b - a) * i as f64 / last).exp(),
        })
        .collect()
}
