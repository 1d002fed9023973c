//! Row-major observation matrix.

use crate::error::{Error, Result};

/// An n-by-d matrix of observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl DataMatrix {
    pub fn from_flat(values: Vec<f64>, n_rows: usize, n_cols: usize) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::DimensionMismatch(
                "data matrix must have at least one row and one column".into(),
            ));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for a {}x{} matrix, got {}",
                n_rows * n_cols,
                n_rows,
                n_cols,
                values.len()
            )));
        }
        Ok(Self {
            values,
            n_rows,
            n_cols,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::DimensionMismatch("no rows".into()));
        }
        let n_cols = rows[0].len();
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} columns, expected {}",
                    i,
                    row.len(),
                    n_cols
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, rows.len(), n_cols)
    }

    /// 1-d convenience constructor.
    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::from_flat(values, n, 1)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols)
    }

    pub fn check_finite(&self) -> Result<()> {
        for (idx, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: idx / self.n_cols,
                    col: idx % self.n_cols,
                });
            }
        }
        Ok(())
    }

    /// True when every row equals the first one.
    pub fn is_constant(&self) -> bool {
        let first = self.row(0);
        self.rows().all(|r| r == first)
    }

    pub fn column_mean(&self, j: usize) -> f64 {
        self.rows().map(|r| r[j]).sum::<f64>() / self.n_rows as f64
    }

    /// Population-style variance (divides by n).
    pub fn column_variance(&self, j: usize) -> f64 {
        let mean = self.column_mean(j);
        self.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / self.n_rows as f64
    }

    pub fn column_min_max(&self, j: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in self.rows() {
            lo = lo.min(r[j]);
            hi = hi.max(r[j]);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_rows() {
        let err = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn finds_non_finite_values() {
        let m = DataMatrix::from_flat(vec![1.0, 2.0, f64::NAN, 4.0], 2, 2).unwrap();
        match m.check_finite().unwrap_err() {
            Error::NonFiniteValue { row, col } => {
                assert_eq!((row, col), (1, 0));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn column_stats() {
        let m = DataMatrix::from_column(vec![1.0, 3.0]).unwrap();
        assert_eq!(m.column_mean(0), 2.0);
        assert_eq!(m.column_variance(0), 1.0);
        assert_eq!(m.column_min_max(0), (1.0, 3.0));
        assert!(!m.is_constant());
    }
}
