//! Random-matrix quantities that govern the criteria in high dimension: the
//! spike map `φ_c`, the Marčenko–Pastur law and the gap conditions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Limit `c` of `d/k`. Positive, finite and never 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AspectRatio(f64);

impl AspectRatio {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!(
                "aspect ratio must be positive and finite, got {c}"
            )));
        }
        if c == 1.0 {
            return Err(Error::InvalidInput("c = 1 excluded".into()));
        }
        Ok(Self(c))
    }

    /// `d / k`, rejecting `d = k`.
    pub fn from_dims(d: usize, k: usize) -> Result<Self> {
        if d == k {
            return Err(Error::UnitAspectRatio(d));
        }
        Self::new(d as f64 / k as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 + √c`, the distant-spike threshold.
    pub fn spike_threshold(self) -> f64 {
        1.0 + self.0.sqrt()
    }

    /// `(1 + √c)²`, the right edge of the bulk.
    pub fn bulk_edge(self) -> f64 {
        self.spike_threshold().powi(2)
    }
}

impl TryFrom<f64> for AspectRatio {
    type Error = Error;

    fn try_from(c: f64) -> Result<Self> {
        Self::new(c)
    }
}

impl From<AspectRatio> for f64 {
    fn from(c: AspectRatio) -> f64 {
        c.0
    }
}

/// `φ_c(x) = x (1 + c/(x − 1))`, the limit of a distant empirical spike.
pub fn phi_c(x: f64, c: AspectRatio) -> Result<f64> {
    if x.is_nan() || x <= 1.0 {
        return Err(Error::PhiDomain(x));
    }
    Ok(x * (1.0 + c.value() / (x - 1.0)))
}

/// `ξ > 1 + √c`.
pub fn distant_spike_check(xi: f64, c: AspectRatio) -> bool {
    xi > c.spike_threshold()
}

/// What a population spike `ξ` turns into in the scaled empirical spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeForecast {
    pub xi: f64,
    pub is_distant: bool,
    pub predicted_empirical: f64,
}

impl SpikeForecast {
    pub fn new(xi: f64, c: AspectRatio) -> Result<Self> {
        if xi.is_nan() || xi <= 1.0 {
            return Err(Error::PhiDomain(xi));
        }
        let is_distant = distant_spike_check(xi, c);
        let predicted_empirical = if is_distant {
            phi_c(xi, c)?
        } else {
            c.bulk_edge()
        };
        Ok(Self {
            xi,
            is_distant,
            predicted_empirical,
        })
    }
}

/// Signed margin of a gap inequality; satisfied iff the margin is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    pub margin: f64,
    pub satisfied: bool,
}

impl GapCheck {
    fn from_margin(margin: f64) -> Self {
        Self {
            margin,
            satisfied: margin > 0.0,
        }
    }
}

fn require_distant(xi: f64, c: AspectRatio) -> Result<f64> {
    if !distant_spike_check(xi, c) {
        return Err(Error::NotDistant {
            xi,
            threshold: c.spike_threshold(),
        });
    }
    phi_c(xi, c)
}

/// `φ_c(ξ) − 1 − log φ_c(ξ) − 2c`.
pub fn gap_condition(xi: f64, c: AspectRatio) -> Result<GapCheck> {
    let phi = require_distant(xi, c)?;
    Ok(GapCheck::from_margin(
        phi - 1.0 - phi.ln() - 2.0 * c.value(),
    ))
}

/// `φ_c(ξ)/c − 1 − log(φ_c(ξ)/c) − 2/c`, for `c > 1`.
pub fn modified_gap_condition(xi: f64, c: AspectRatio) -> Result<GapCheck> {
    if c.value() <= 1.0 {
        return Err(Error::ModifiedGapDomain(c.value()));
    }
    let ratio = require_distant(xi, c)? / c.value();
    Ok(GapCheck::from_margin(
        ratio - 1.0 - ratio.ln() - 2.0 / c.value(),
    ))
}

/// The gap condition that governs the AIC-family criterion for this `c`:
/// the plain one below 1, the modified one above.
pub fn applicable_gap_condition(xi: f64, c: AspectRatio) -> Result<GapCheck> {
    if c.value() < 1.0 {
        gap_condition(xi, c)
    } else {
        modified_gap_condition(xi, c)
    }
}

/// Absolute tolerance of the CDF quadrature.
const CDF_TOL: f64 = 1e-11;
/// Absolute x-tolerance of the quantile bisection.
pub const QUANTILE_X_TOL: f64 = 1e-8;

/// Marčenko–Pastur law with ratio `c > 0`.
///
/// Unlike [`AspectRatio`] this accepts `c = 1`, where the law is still well
/// defined (support `[0, 4]`, no point mass).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchenkoPastur {
    c: f64,
    lower: f64,
    upper: f64,
}

impl MarchenkoPastur {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Marchenko-Pastur ratio must be positive, got {c}"
            )));
        }
        let s = c.sqrt();
        Ok(Self {
            c,
            lower: (1.0 - s).powi(2),
            upper: (1.0 + s).powi(2),
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `((1 − √c)², (1 + √c)²)`
    pub fn support(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Mass of the atom at zero: `max(0, 1 − 1/c)`.
    pub fn point_mass(&self) -> f64 {
        (1.0 - 1.0 / self.c).max(0.0)
    }

    /// Density of the continuous part; zero outside the open support.
    pub fn density(&self, x: f64) -> f64 {
        if x <= self.lower || x >= self.upper {
            return 0.0;
        }
        ((self.upper - x) * (x - self.lower)).sqrt() / (2.0 * PI * x * self.c)
    }

    /// Density integrand after `x = a + (b − a) u`, `u = (1 − cos t)/2`. The
    /// square-root edges cancel against the Jacobian, leaving a smooth
    /// function of `t ∈ [0, π]`.
    fn integrand(&self, t: f64) -> f64 {
        let (a, b) = (self.lower, self.upper);
        let u = (0.5 * t).sin().powi(2);
        let width = b - a;
        if a == 0.0 {
            // c = 1: x = b·u and the u cancels
            return b * (1.0 - u) / (2.0 * PI * self.c);
        }
        let x = a + width * u;
        width * width * u * (1.0 - u) / (2.0 * PI * self.c * x)
    }

    fn angle_of(&self, x: f64) -> f64 {
        let u = ((x - self.lower) / (self.upper - self.lower)).clamp(0.0, 1.0);
        // u = sin²(t/2)
        2.0 * u.sqrt().asin()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let atom = self.point_mass();
        if x <= self.lower {
            return atom;
        }
        let t = self.angle_of(x.min(self.upper));
        let mass = adaptive_simpson(&|t| self.integrand(t), 0.0, t, CDF_TOL);
        (atom + mass).min(1.0)
    }

    /// Generalized inverse of [`cdf`](Self::cdf) on the continuous range
    /// `alpha ∈ (point_mass, 1)`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        let lower_mass = self.point_mass();
        if !(alpha > lower_mass && alpha < 1.0) {
            return Err(Error::QuantileRange {
                alpha,
                lower: lower_mass,
            });
        }
        let (mut lo, mut hi) = (self.lower, self.upper);
        while hi - lo > QUANTILE_X_TOL {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

impl From<AspectRatio> for MarchenkoPastur {
    fn from(c: AspectRatio) -> Self {
        // AspectRatio is already validated
        MarchenkoPastur::new(c.value()).expect("valid aspect ratio")
    }
}

pub fn mp_density(x: f64, c: AspectRatio) -> f64 {
    MarchenkoPastur::from(c).density(x)
}

pub fn mp_point_mass(c: AspectRatio) -> f64 {
    MarchenkoPastur::from(c).point_mass()
}

pub fn mp_cdf(x: f64, c: AspectRatio) -> f64 {
    MarchenkoPastur::from(c).cdf(x)
}

pub fn mp_quantile(alpha: f64, c: AspectRatio) -> Result<f64> {
    MarchenkoPastur::from(c).quantile(alpha)
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, b - a);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}
