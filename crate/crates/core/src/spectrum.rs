//! Eigenvalue spectra of angular covariance estimates and scree diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::angular::AngularCovariance;
use crate::error::{Error, Result};

/// Eigenvalues below this are treated as a malformed (non-PSD) input; values
/// between it and zero are clamped to zero.
pub const PSD_SLACK: f64 = 1e-8;

/// Descending eigenvalues of a `d × d` covariance estimate built from `k`
/// extremes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    k: usize,
}

impl Spectrum {
    /// Builds a spectrum from raw values, sorting them descending and applying
    /// the PSD clamp.
    pub fn new(mut eigenvalues: Vec<f64>, k: usize) -> Result<Self> {
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if eigenvalues.is_empty() {
            return Err(Error::InvalidInput("empty spectrum".into()));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let smallest = *eigenvalues.last().unwrap();
        if smallest < -PSD_SLACK {
            return Err(Error::NotPsd(smallest));
        }
        for v in eigenvalues.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self { eigenvalues, k })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn d(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Same spectrum with every eigenvalue multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.eigenvalues.iter().map(|v| v * s).collect(), self.k)
    }

    pub fn leading(&self) -> f64 {
        self.eigenvalues[0]
    }
}

fn eigen_descending(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let eig = SymmetricEigen::new(matrix.clone());
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Eigenvalues of the covariance estimate in descending order.
pub fn eigenvalues_descending(cov: &AngularCovariance) -> Result<Spectrum> {
    Spectrum::new(eigen_descending(cov.matrix())?, cov.k())
}

/// Scaled eigenvalues `ℓᵢ/ℓ₁` and scaled consecutive differences
/// `(ℓᵢ − ℓᵢ₊₁)/ℓ₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeTable {
    pub scaled: Vec<f64>,
    pub increments: Vec<f64>,
}

pub fn scree(spec: &Spectrum, limit: usize) -> Result<ScreeTable> {
    let lead = spec.leading();
    if lead <= 0.0 {
        return Err(Error::DegenerateSpectrum(lead));
    }
    if limit == 0 || limit > spec.d() {
        return Err(Error::InvalidInput(format!(
            "scree limit {limit} must be in 1..={}",
            spec.d()
        )));
    }
    let values = &spec.eigenvalues[..limit];
    let scaled = values.iter().map(|v| v / lead).collect();
    let increments = values.windows(2).map(|w| (w[0] - w[1]) / lead).collect();
    Ok(ScreeTable { scaled, increments })
}

/// Writes `(index, value)` rows with 1-based indices.
pub fn write_indexed_csv<W: std::io::Write>(
    values: &[f64],
    header: &str,
    mut out: W,
) -> Result<()> {
    writeln!(out, "index,{header}")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, v)?;
    }
    Ok(())
}

/// Reads back the output of [`write_indexed_csv`]. Lines starting with `#`
/// are ignored.
pub fn read_indexed_csv<R: std::io::Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let value = record
            .get(1)
            .and_then(|c| c.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidInput(format!("bad row {record:?}")))?;
        values.push(value);
    }
    Ok(values)
}
