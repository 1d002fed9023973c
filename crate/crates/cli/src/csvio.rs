//! Dataset ingestion from delimiter-separated files.

use std::path::{Path, PathBuf};

use lccmix_core::data::DataMatrix;

use crate::errors::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Zero-based column indices to keep; `None` keeps every column.
    pub columns: Option<Vec<usize>>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            columns: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub matrix: DataMatrix,
    pub column_names: Vec<String>,
    pub source: PathBuf,
}

/// Reads a numeric matrix. Ragged rows, non-numeric cells, non-finite values
/// and empty files are each reported as distinct input errors naming the
/// offending line.
pub fn read_csv(path: &Path, options: &CsvOptions) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;

    let mut records = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| CliError::input(format!("csv parse error: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        records.push((line, record));
    }
    if records.is_empty() {
        return Err(CliError::input(format!(
            "empty file: {} contains no rows",
            path.display()
        )));
    }

    let width = records[0].1.len();
    let selected: Vec<usize> = match &options.columns {
        Some(cols) => {
            if cols.is_empty() {
                return Err(CliError::config("no columns selected"));
            }
            for &c in cols {
                if c >= width {
                    return Err(CliError::config(format!(
                        "selected column {c} out of range; file has {width} columns"
                    )));
                }
            }
            cols.clone()
        }
        None => (0..width).collect(),
    };

    let mut column_names: Vec<String> = selected.iter().map(|c| format!("col{c}")).collect();
    let mut start = 0;
    if options.has_header {
        let (_, header) = &records[0];
        column_names = selected
            .iter()
            .map(|&c| header.get(c).unwrap_or("").trim().to_string())
            .collect();
        start = 1;
        if records.len() == 1 {
            return Err(CliError::input(format!(
                "empty file: {} has a header but no data rows",
                path.display()
            )));
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(records.len() - start);
    for (line, record) in &records[start..] {
        if record.len() != width {
            return Err(CliError::input(format!(
                "ragged row at line {line}: {} fields, expected {width}",
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(selected.len());
        for &c in &selected {
            let cell = record.get(c).unwrap_or("").trim();
            let value: f64 = cell.parse().map_err(|_| {
                CliError::input(format!(
                    "non-numeric cell at line {line}, column {c}: '{cell}'"
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::input(format!(
                    "non-finite value at line {line}, column {c}"
                )));
            }
            row.push(value);
        }
        rows.push(row);
    }

    let matrix = DataMatrix::from_rows(&rows)?;
    Ok(Dataset {
        matrix,
        column_names,
        source: path.to_path_buf(),
    })
}

/// Writes a numeric matrix back out with round-trip-exact reals.
pub fn write_csv(matrix: &DataMatrix, column_names: &[String], delimiter: char) -> String {
    let mut out = String::new();
    if !column_names.is_empty() {
        out.push_str(&column_names.join(&delimiter.to_string()));
        out.push('\n');
    }
    for row in matrix.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(&delimiter.to_string()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_headered_column() {
        let f = write_temp("x\n1.0\n2.0\n");
        let ds = read_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(ds.matrix.n_rows(), 2);
        assert_eq!(ds.matrix.n_cols(), 1);
        assert_eq!(ds.matrix.value(0, 0), 1.0);
        assert_eq!(ds.matrix.value(1, 0), 2.0);
        assert_eq!(ds.column_names, vec!["x"]);
    }

    #[test]
    fn ragged_row_names_the_line() {
        let f = write_temp("a,b\n1,2\n3\n");
        let err = read_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn nan_literal_is_rejected_as_non_finite() {
        let f = write_temp("x\n1.0\nNaN\n");
        let err = read_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn non_numeric_cell_names_position() {
        let f = write_temp("x,y\n1.0,2.0\n3.0,oops\n");
        let err = read_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("column 1"), "{err}");
    }

    #[test]
    fn empty_file_is_its_own_error() {
        let f = write_temp("");
        let err = read_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("empty file"), "{err}");
    }

    #[test]
    fn write_then_read_is_identity_on_the_matrix() {
        let f = write_temp("x,y\n0.1,0.2\n-1.5,3.25\n0.3333333333333333,2.0\n");
        let ds = read_csv(f.path(), &CsvOptions::default()).unwrap();
        let text = write_csv(&ds.matrix, &ds.column_names, ',');
        let g = write_temp(&text);
        let back = read_csv(g.path(), &CsvOptions::default()).unwrap();
        assert_eq!(ds.matrix.n_rows(), back.matrix.n_rows());
        for (a, b) in ds.matrix.values().iter().zip(back.matrix.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn column_selection_and_no_header() {
        let f = write_temp("1.0;2.0;3.0\n4.0;5.0;6.0\n");
        let opts = CsvOptions {
            delimiter: b';',
            has_header: false,
            columns: Some(vec![2, 0]),
        };
        let ds = read_csv(f.path(), &opts).unwrap();
        assert_eq!(ds.matrix.n_cols(), 2);
        assert_eq!(ds.matrix.value(0, 0), 3.0);
        assert_eq!(ds.matrix.value(0, 1), 1.0);
    }
}
