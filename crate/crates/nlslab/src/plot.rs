//! Export of `(t, column)` pairs as whitespace-delimited text for gnuplot.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::records::{fmt_value, RecordError, Table};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("unknown column `{column}`; valid columns: {}", .valid.join(", "))]
    UnknownColumn { column: String, valid: Vec<String> },
    #[error("insufficient data: record has no rows")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Data columns of a record: everything but `t`.
pub fn data_columns(table: &Table) -> Vec<String> {
    table.columns.iter().skip(1).cloned().collect()
}

/// Writes `<stem>_<column>.dat` into `out_dir` for each requested column
/// (all data columns when `columns` is empty) and returns the paths.
pub fn export(
    record: &Path,
    columns: &[String],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, PlotError> {
    let table = Table::read(record)?;
    let valid = data_columns(&table);
    let wanted: Vec<String> = if columns.is_empty() {
        valid.clone()
    } else {
        columns.to_vec()
    };
    if let Some(bad) = wanted.iter().find(|c| !valid.contains(c)) {
        return Err(PlotError::UnknownColumn {
            column: bad.clone(),
            valid,
        });
    }
    if table.rows.is_empty() {
        return Err(PlotError::Empty);
    }
    fs::create_dir_all(out_dir).map_err(|source| PlotError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let stem = record
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("record");
    let mut written = Vec::new();
    for col in &wanted {
        let series = table.series(col).expect("column validated");
        let mut text = format!("# t {col}\n");
        for (t, v) in series {
            text.push_str(&fmt_value(t));
            text.push(' ');
            text.push_str(&fmt_value(v));
            text.push('\n');
        }
        let path = out_dir.join(format!("{stem}_{col}.dat"));
        fs::write(&path, text).map_err(|source| PlotError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}
