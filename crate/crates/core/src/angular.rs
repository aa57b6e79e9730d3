//! Margin standardization, extreme selection and the empirical angular
//! covariance matrix.
//!
//! The angular covariance is built from the `k` observations with the largest
//! Euclidean norm. Each one is projected onto the unit sphere and the
//! resulting directions are centered at their mean:
//!
//! ```text
//! Σ̂ = (1/k) Σⱼ (θⱼ − θ̄)(θⱼ − θ̄)ᵀ,   θⱼ = Xⱼ / ‖Xⱼ‖
//! ```
//!
//! The divisor is `k`, not `k − 1`.

use nalgebra::DMatrix;

use crate::data::{euclidean_norm, DataMatrix};
use crate::error::{Error, Result};

/// Unit directions of the `k` largest-norm observations.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSample {
    directions: DMatrix<f64>,
    source_indices: Vec<usize>,
}

impl AngularSample {
    /// Builds a sample from explicit directions. Every row is checked to have
    /// unit norm within 1e-10.
    pub fn new(directions: DMatrix<f64>, source_indices: Vec<usize>) -> Result<Self> {
        if directions.nrows() != source_indices.len() {
            return Err(Error::InvalidInput(format!(
                "{} directions but {} source indices",
                directions.nrows(),
                source_indices.len()
            )));
        }
        if directions.nrows() == 0 {
            return Err(Error::InvalidInput("empty angular sample".into()));
        }
        for (i, row) in directions.row_iter().enumerate() {
            let norm = row.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput(format!(
                    "direction {i} has norm {norm}, expected 1"
                )));
            }
        }
        let mut sorted = source_indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate source indices".into()));
        }
        Ok(Self {
            directions,
            source_indices,
        })
    }

    /// Normalizes each row of `rows` and labels them `0..k`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut directions = DMatrix::zeros(rows.len(), d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidInput("ragged rows".into()));
            }
            let norm = euclidean_norm(row);
            if norm == 0.0 {
                return Err(Error::ZeroNormExtreme { row: i });
            }
            for (j, v) in row.iter().enumerate() {
                directions[(i, j)] = v / norm;
            }
        }
        Self::new(directions, (0..rows.len()).collect())
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    pub fn k(&self) -> usize {
        self.directions.nrows()
    }

    pub fn d(&self) -> usize {
        self.directions.ncols()
    }
}

/// Empirical angular covariance matrix together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularCovariance {
    matrix: DMatrix<f64>,
    k: usize,
}

impl AngularCovariance {
    /// Wraps a symmetric matrix. Used for externally supplied covariance
    /// estimates; `k` is the number of observations behind it.
    pub fn from_matrix(matrix: DMatrix<f64>, k: usize) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::InvalidInput(
                "covariance must be square, d >= 2".into(),
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let d = matrix.nrows();
        for i in 0..d {
            for j in (i + 1)..d {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-10 {
                    return Err(Error::InvalidInput(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { matrix, k })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

/// Result of [`frechet_margin_transform`].
#[derive(Debug, Clone)]
pub struct MarginTransform {
    pub data: DataMatrix,
    /// Columns whose entries were all tied. Their output is constant.
    pub constant_columns: Vec<usize>,
}

/// Average ranks (1-based) of `values`; ties share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Replaces every column by `−1 / log(rank / (n + 1))`, which maps the
/// empirical margins onto standard Fréchet quantiles.
pub fn frechet_margin_transform(data: &DataMatrix) -> Result<MarginTransform> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::InvalidInput(
            "margin transform needs at least two observations".into(),
        ));
    }
    let denom = (n + 1) as f64;
    let mut constant_columns = Vec::new();
    let columns: Vec<Vec<f64>> = (0..data.cols())
        .map(|j| {
            let col = data.column(j);
            if col.iter().all(|v| *v == col[0]) {
                constant_columns.push(j);
            }
            average_ranks(&col)
                .into_iter()
                .map(|r| -1.0 / (r / denom).ln())
                .collect()
        })
        .collect();
    Ok(MarginTransform {
        data: DataMatrix::from_columns(n, &columns)?,
        constant_columns,
    })
}

/// Selects the `k` rows with the largest Euclidean norm and projects them onto
/// the unit sphere.
///
/// Exactly `k` rows are returned. Rows with equal norm are ordered by row
/// index, so at the threshold the earlier row wins. Directions are stored in
/// descending norm order.
pub fn select_extremes(data: &DataMatrix, k: usize) -> Result<AngularSample> {
    let n = data.rows();
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    if k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let norms = data.row_norms();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps lower indices first among equal norms
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    order.truncate(k);

    let d = data.cols();
    let mut directions = DMatrix::zeros(k, d);
    for (i, &row) in order.iter().enumerate() {
        let norm = norms[row];
        if norm == 0.0 {
            return Err(Error::ZeroNormExtreme { row });
        }
        for (j, v) in data.row(row).iter().enumerate() {
            directions[(i, j)] = v / norm;
        }
    }
    Ok(AngularSample {
        directions,
        source_indices: order,
    })
}

/// Rows of `directions` in lexicographic order, so that sums over the sample
/// do not depend on how the rows were ordered.
fn canonical_rows(directions: &DMatrix<f64>) -> DMatrix<f64> {
    let mut order: Vec<usize> = (0..directions.nrows()).collect();
    order.sort_by(|&a, &b| {
        directions
            .row(a)
            .iter()
            .zip(directions.row(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    directions.select_rows(order.iter())
}

fn column_means(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows() as f64;
    m.column_iter().map(|c| c.sum() / k).collect()
}

/// Mean of the sample directions.
pub fn empirical_mean_direction(sample: &AngularSample) -> Vec<f64> {
    column_means(&canonical_rows(&sample.directions))
}

/// Empirical angular covariance with divisor `k`.
pub fn empirical_angular_covariance(sample: &AngularSample) -> Result<AngularCovariance> {
    let k = sample.k();
    if k < 2 {
        return Err(Error::TooFewExtremes(k));
    }
    let mut centered = canonical_rows(&sample.directions);
    let mean = column_means(&centered);
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let mut matrix = centered.tr_mul(&centered);
    matrix /= k as f64;
    // gemm output is symmetric up to rounding; make it exact
    let d = matrix.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Ok(AngularCovariance { matrix, k })
}
