//! Information criteria for the spike location.
//!
//! Every criterion shares a Gaussian log-likelihood part built from the first
//! `m` descending eigenvalues `ℓ₁ ≥ … ≥ ℓₘ`:
//!
//! ```text
//! L(p) = Σ_{i≤p} log ℓᵢ + (m − p) · log( (1/(m − p)) Σ_{j=p+1}^{m} ℓⱼ )
//! ```
//!
//! With `k > d` the fixed-dimensional (`AIC`, `BIC`) and circle (`AIC°`,
//! `BIC°`) variants use `m = d − 1`, dropping the smallest eigenvalue. With
//! `d > k` the star variants (`AIC*`, `BIC*`) use `m = k − 1` and swap the
//! roles of `d` and `k` in the constant and penalty terms.
//!
//! The fixed-dimensional BIC penalty is `log(k)·(p+1)(d − p/2)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

const LOG_2PI_PLUS_1: f64 = 2.837_877_066_409_345_5; // ln(2π) + 1

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CriterionKind {
    AicFixed,
    BicFixed,
    AicCirc,
    BicCirc,
    AicStar,
    BicStar,
}

/// Which side of `c = d/k = 1` a criterion belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `k > d`
    Fixed,
    /// `d > k`
    Star,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Fixed => "fixed",
            Regime::Star => "star",
        })
    }
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 6] = [
        CriterionKind::AicFixed,
        CriterionKind::BicFixed,
        CriterionKind::AicCirc,
        CriterionKind::BicCirc,
        CriterionKind::AicStar,
        CriterionKind::BicStar,
    ];

    pub fn regime(self) -> Regime {
        match self {
            CriterionKind::AicStar | CriterionKind::BicStar => Regime::Star,
            _ => Regime::Fixed,
        }
    }

    pub fn is_bic(self) -> bool {
        matches!(
            self,
            CriterionKind::BicFixed | CriterionKind::BicCirc | CriterionKind::BicStar
        )
    }

    /// Short display label, e.g. `AIC*`.
    pub fn label(self) -> &'static str {
        match self {
            CriterionKind::AicFixed => "AIC",
            CriterionKind::BicFixed => "BIC",
            CriterionKind::AicCirc => "AIC°",
            CriterionKind::BicCirc => "BIC°",
            CriterionKind::AicStar => "AIC*",
            CriterionKind::BicStar => "BIC*",
        }
    }

    /// Command-line spelling, e.g. `aic-star`.
    pub fn cli_name(self) -> &'static str {
        match self {
            CriterionKind::AicFixed => "aic",
            CriterionKind::BicFixed => "bic",
            CriterionKind::AicCirc => "aic-circ",
            CriterionKind::BicCirc => "bic-circ",
            CriterionKind::AicStar => "aic-star",
            CriterionKind::BicStar => "bic-star",
        }
    }

    /// Number of leading eigenvalues that enter the criterion.
    fn used_eigenvalues(self, d: usize, k: usize) -> usize {
        match self.regime() {
            Regime::Fixed => d - 1,
            Regime::Star => k - 1,
        }
    }

    /// Largest admissible candidate dimension: `d − 2` or `k − 2`.
    pub fn max_p(self, d: usize, k: usize) -> usize {
        self.used_eigenvalues(d, k).saturating_sub(1)
    }

    /// Default candidate bound: `d − 2` for `k > d`, `min(k − 2, ⌈d/2⌉)` for
    /// `d > k`.
    pub fn default_q(self, d: usize, k: usize) -> usize {
        match self.regime() {
            Regime::Fixed => self.max_p(d, k),
            Regime::Star => self.max_p(d, k).min(d.div_ceil(2)),
        }
    }

    pub(crate) fn check_regime(self, d: usize, k: usize) -> Result<()> {
        let ok = match self.regime() {
            Regime::Fixed => k > d,
            Regime::Star => d > k,
        };
        if !ok {
            return Err(Error::RegimeMismatch(format!(
                "{} requires {} but d = {d}, k = {k}",
                self.label(),
                match self.regime() {
                    Regime::Fixed => "k > d",
                    Regime::Star => "d > k",
                }
            )));
        }
        Ok(())
    }

    /// Terms that do not depend on `p`, per unit of the log-likelihood weight.
    fn constant(self, d: f64, k: f64) -> f64 {
        match self.regime() {
            Regime::Fixed => (d - 1.0) * (((k - 1.0) / k).ln() + LOG_2PI_PLUS_1),
            Regime::Star => (k - 1.0) * (((d - 1.0) / d).ln() + LOG_2PI_PLUS_1),
        }
    }

    fn penalty(self, p: f64, d: f64, k: f64) -> f64 {
        match self {
            CriterionKind::AicFixed => 2.0 * (p + 1.0) * (d - p / 2.0),
            CriterionKind::BicFixed => k.ln() * (p + 1.0) * (d - p / 2.0),
            CriterionKind::AicCirc => (p + 1.0) * (2.0 * d - p) / k,
            CriterionKind::BicCirc => k.ln() * (p + 1.0) * (d - p / 2.0) / k,
            CriterionKind::AicStar => (p + 1.0) * (2.0 * k - p) / d,
            CriterionKind::BicStar => d.ln() * (p + 1.0) * (k - p / 2.0) / d,
        }
    }

    /// Multiplier on the likelihood and constant parts: `k` for the
    /// fixed-dimensional pair, 1 otherwise.
    fn weight(self, k: f64) -> f64 {
        match self {
            CriterionKind::AicFixed | CriterionKind::BicFixed => k,
            _ => 1.0,
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CriterionKind::ALL
            .into_iter()
            .find(|k| k.cli_name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown criterion {s:?}")))
    }
}

/// Prefix sums of `log ℓᵢ` and suffix sums of `ℓᵢ` over the first `m`
/// eigenvalues, so a whole curve costs `O(m)`.
struct LikelihoodTable {
    log_prefix: Vec<f64>,
    suffix: Vec<f64>,
    m: usize,
}

impl LikelihoodTable {
    fn new(spec: &Spectrum, m: usize) -> Result<Self> {
        let ell = &spec.eigenvalues()[..m];
        if let Some(index) = ell.iter().position(|v| *v <= 0.0) {
            return Err(Error::NonpositiveEigenvalue {
                index: index + 1,
                value: ell[index],
            });
        }
        let mut log_prefix = Vec::with_capacity(m + 1);
        log_prefix.push(0.0);
        let mut acc = 0.0;
        for v in ell {
            acc += v.ln();
            log_prefix.push(acc);
        }
        let mut suffix = vec![0.0; m + 1];
        for i in (0..m).rev() {
            suffix[i] = suffix[i + 1] + ell[i];
        }
        Ok(Self {
            log_prefix,
            suffix,
            m,
        })
    }

    fn log_likelihood(&self, p: usize) -> f64 {
        let rest = (self.m - p) as f64;
        self.log_prefix[p] + rest * (self.suffix[p] / rest).ln()
    }
}

fn check_p(kind: CriterionKind, d: usize, k: usize, p: usize) -> Result<()> {
    let max = kind.max_p(d, k);
    if p < 1 || p > max {
        return Err(Error::CandidateOutOfRange(format!(
            "{} admits p in 1..={max}, got {p}",
            kind.label()
        )));
    }
    Ok(())
}

/// Value of criterion `kind` at candidate dimension `p`.
pub fn criterion_value(spec: &Spectrum, kind: CriterionKind, p: usize) -> Result<f64> {
    let (d, k) = (spec.d(), spec.k());
    kind.check_regime(d, k)?;
    check_p(kind, d, k, p)?;
    let table = LikelihoodTable::new(spec, kind.used_eigenvalues(d, k))?;
    Ok(evaluate(&table, kind, d, k, p))
}

fn evaluate(table: &LikelihoodTable, kind: CriterionKind, d: usize, k: usize, p: usize) -> f64 {
    let (df, kf) = (d as f64, k as f64);
    kind.weight(kf) * (table.log_likelihood(p) + kind.constant(df, kf))
        + kind.penalty(p as f64, df, kf)
}

pub fn aic_fixed(spec: &Spectrum, p: usize) -> Result<f64> {
    criterion_value(spec, CriterionKind::AicFixed, p)
}

pub fn bic_fixed(spec: &Spectrum, p: usize) -> Result<f64> {
    criterion_value(spec, CriterionKind::BicFixed, p)
}

pub fn aic_circ(spec: &Spectrum, p: usize) -> Result<f64> {
    criterion_value(spec, CriterionKind::AicCirc, p)
}

pub fn bic_circ(spec: &Spectrum, p: usize) -> Result<f64> {
    criterion_value(spec, CriterionKind::BicCirc, p)
}

pub fn aic_star(spec: &Spectrum, p: usize) -> Result<f64> {
    criterion_value(spec, CriterionKind::AicStar, p)
}

pub fn bic_star(spec: &Spectrum, p: usize) -> Result<f64> {
    criterion_value(spec, CriterionKind::BicStar, p)
}

/// One criterion evaluated at `p = 1..=q`, with its argmin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionCurve {
    pub kind: CriterionKind,
    pub k: usize,
    pub d: usize,
    pub q: usize,
    pub p_hat: usize,
    /// `values[i]` is the criterion at `p = i + 1`.
    pub values: Vec<f64>,
}

impl CriterionCurve {
    pub fn value_at(&self, p: usize) -> Option<f64> {
        p.checked_sub(1).and_then(|i| self.values.get(i)).copied()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "p,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, v)?;
        }
        Ok(())
    }
}

/// Index (1-based) of the smallest value; the earliest wins on ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best + 1
}

/// Evaluates `kind` for `p = 1..=q` and returns the curve and its argmin.
pub fn estimate_p(spec: &Spectrum, kind: CriterionKind, q: usize) -> Result<CriterionCurve> {
    let (d, k) = (spec.d(), spec.k());
    kind.check_regime(d, k)?;
    let max = kind.max_p(d, k);
    if q < 1 || q > max {
        return Err(Error::CandidateOutOfRange(format!(
            "{} admits q in 1..={max}, got {q}",
            kind.label()
        )));
    }
    let table = LikelihoodTable::new(spec, kind.used_eigenvalues(d, k))?;
    let values: Vec<f64> = (1..=q).map(|p| evaluate(&table, kind, d, k, p)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonpositiveEigenvalue {
            index: i + 1,
            value: values[i],
        });
    }
    Ok(CriterionCurve {
        kind,
        k,
        d,
        q,
        p_hat: argmin(&values),
        values,
    })
}

/// The AIC- and BIC-family criteria appropriate for `(d, k)`.
pub fn select_regime(d: usize, k: usize) -> Result<(CriterionKind, CriterionKind)> {
    if d < 3 || k < 3 {
        return Err(Error::InvalidInput(format!(
            "need d >= 3 and k >= 3, got d = {d}, k = {k}"
        )));
    }
    match k.cmp(&d) {
        std::cmp::Ordering::Greater => Ok((CriterionKind::AicFixed, CriterionKind::BicFixed)),
        std::cmp::Ordering::Less => Ok((CriterionKind::AicStar, CriterionKind::BicStar)),
        std::cmp::Ordering::Equal => Err(Error::UnitAspectRatio(d)),
    }
}
