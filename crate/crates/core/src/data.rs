//! Raw observation matrices and CSV ingestion.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// `n` observations of a `d`-dimensional vector, stored row-major.
///
/// Every entry is finite, `n >= 1` and `d >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows < 1 {
            return Err(Error::InvalidInput("need at least one observation".into()));
        }
        if cols < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least two coordinates, got {cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::InvalidInput(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        self.iter_rows().map(euclidean_norm).collect()
    }

    pub(crate) fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let mut values = vec![0.0; rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                values[i * cols + j] = *v;
            }
        }
        Self::new(rows, cols, values)
    }
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Options for [`read_csv`].
#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

/// Reads a numeric CSV with an optional header row.
///
/// The first record is taken as a header when none of its cells parse as
/// numbers. Any later record with a cell that is empty, non-numeric or
/// non-finite fails the whole read; the error lists every offending row
/// (1-based, counting the header if present).
pub fn read_csv<R: Read>(reader: R, options: CsvOptions) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(options.delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut bad_rows = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = idx + 1;
        let parsed: Vec<Option<f64>> = record
            .iter()
            .map(|cell| cell.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if idx == 0 && parsed.iter().all(Option::is_none) {
            width = Some(parsed.len());
            continue;
        }
        match width {
            Some(w) if w != parsed.len() => {
                return Err(Error::InvalidInput(format!(
                    "row {line} has {} cells, expected {w}",
                    parsed.len()
                )));
            }
            None => width = Some(parsed.len()),
            _ => {}
        }
        if parsed.iter().any(Option::is_none) {
            bad_rows.push(line);
            continue;
        }
        rows.push(parsed.into_iter().flatten().collect());
    }
    if !bad_rows.is_empty() {
        return Err(Error::NonNumericRows { rows: bad_rows });
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("no data rows".into()));
    }
    DataMatrix::from_rows(&rows)
}

pub fn read_csv_path(path: &Path, options: CsvOptions) -> Result<DataMatrix> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), options)
}

/// Writes the matrix as headerless CSV with round-trip float formatting.
pub fn write_csv<W: std::io::Write>(data: &DataMatrix, mut out: W) -> Result<()> {
    for row in data.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(DataMatrix::new(0, 2, vec![]).is_err());
        assert!(DataMatrix::new(1, 1, vec![1.0]).is_err());
        assert!(DataMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DataMatrix::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn csv_with_header() {
        let text = "a,b,c\n1,2,3\n4.5,5,6\n";
        let m = read_csv(text.as_bytes(), CsvOptions::default()).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert_eq!(m.get(1, 0), 4.5);
    }

    #[test]
    fn csv_without_header_and_custom_delimiter() {
        let text = "1;2\n3;4\n";
        let m = read_csv(text.as_bytes(), CsvOptions { delimiter: b';' }).unwrap();
        assert_eq!(m.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn csv_lists_bad_rows() {
        let text = "x,y\n1,2\nfoo,3\n4,\n5,6\n";
        match read_csv(text.as_bytes(), CsvOptions::default()) {
            Err(Error::NonNumericRows { rows }) => assert_eq!(rows, vec![3, 4]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_nan() {
        let text = "1,2\nNaN,3\n";
        assert!(matches!(
            read_csv(text.as_bytes(), CsvOptions::default()),
            Err(Error::NonNumericRows { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let m = DataMatrix::new(2, 2, vec![0.1, 1e-300, -3.25, 7.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        write_csv(&m, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), CsvOptions::default()).unwrap();
        assert_eq!(back, m);
    }
}
