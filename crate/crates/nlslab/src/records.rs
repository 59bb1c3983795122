//! CSV serialization of diagnostics series and scattering curves.

use std::io;
use std::path::Path;

use nlslab_core::DiagnosticsRecord;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("row {row}: cannot read `{value}` in column {column}")]
    Value {
        row: usize,
        column: String,
        value: String,
    },
}

/// Column label of an `L^r` norm: `l_3`, `l_2.5`.
pub fn lr_column(r: f64) -> String {
    format!("l_{r}")
}

/// `%.16e`: 17 significant digits, enough to reproduce every `f64`.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_value(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

/// Column order of the diagnostics CSV.
pub fn diagnostics_header(r_list: &[f64], accumulators: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = ["t", "mass", "energy", "h1", "l_inf"]
        .map(String::from)
        .to_vec();
    h.extend(r_list.iter().map(|&r| lr_column(r)));
    h.push("local_mass_sup".into());
    h.push("gn_ratio".into());
    h.extend(accumulators.iter().map(|n| format!("st_{n}")));
    h.push("edge_mass".into());
    h
}

fn row(rec: &DiagnosticsRecord) -> Vec<String> {
    let mut out = vec![
        fmt_value(rec.t),
        fmt_value(rec.mass),
        fmt_value(rec.energy),
        fmt_value(rec.h1),
        fmt_value(rec.linf),
    ];
    out.extend(rec.lr_norms.iter().map(|(_, v)| fmt_value(*v)));
    out.push(fmt_value(rec.local_mass_sup));
    out.push(fmt_value(rec.gn_ratio));
    out.extend(rec.st_accumulators.iter().map(|(_, v)| fmt_value(*v)));
    out.push(fmt_value(rec.edge_mass));
    out
}

/// Serializes a series. The header comes from `r_list` and `accumulators`
/// so that an empty series still carries its schema.
pub fn diagnostics_csv(
    records: &[DiagnosticsRecord],
    r_list: &[f64],
    accumulators: &[&str],
) -> Result<Vec<u8>, RecordError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(diagnostics_header(r_list, accumulators))?;
    for rec in records {
        w.write_record(row(rec))?;
    }
    w.into_inner().map_err(|e| RecordError::Io(e.into_error()))
}

/// A CSV read back as named numeric columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    pub fn column(&self, column: &str) -> Option<Vec<f64>> {
        let i = self.index(column)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Pairs `(t, column)`; `t` is taken to be the first column.
    pub fn series(&self, column: &str) -> Option<Vec<(f64, f64)>> {
        let i = self.index(column)?;
        Some(self.rows.iter().map(|r| (r[0], r[i])).collect())
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, RecordError> {
        let mut rdr = csv::Reader::from_reader(bytes);
        let columns: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        if columns.first().map(String::as_str) != Some("t") {
            return Err(RecordError::Header("first column must be `t`".into()));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .zip(&columns)
                .map(|(s, c)| {
                    parse_value(s).ok_or_else(|| RecordError::Value {
                        row: i + 1,
                        column: c.clone(),
                        value: s.into(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(vals);
        }
        Ok(Self { columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self, RecordError> {
        Self::parse(&std::fs::read(path)?)
    }
}

/// One row of the scattering CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringRow {
    pub t: f64,
    pub deficit_l2: f64,
    pub deficit_h1: f64,
    /// `||e^{itΔ} phi_plus||_{L^r}` per configured r, ascending.
    pub free_lr: Vec<f64>,
}

pub fn scattering_csv(rows: &[ScatteringRow], r_list: &[f64]) -> Result<Vec<u8>, RecordError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["t", "deficit_l2", "deficit_h1"].map(String::from).to_vec();
    header.extend(r_list.iter().map(|&r| format!("free_{}", lr_column(r))));
    w.write_record(&header)?;
    for r in rows {
        let mut out = vec![
            fmt_value(r.t),
            fmt_value(r.deficit_l2),
            fmt_value(r.deficit_h1),
        ];
        out.extend(r.free_lr.iter().map(|v| fmt_value(*v)));
        w.write_record(out)?;
    }
    w.into_inner().map_err(|e| RecordError::Io(e.into_error()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            mass: 1.0 / 3.0,
            energy: 2.0,
            h1: 3.0,
            linf: 0.1,
            lr_norms: vec![(3.0, 0.5), (4.5, 0.25)],
            local_mass_sup: 0.2,
            gn_ratio: f64::NAN,
            st_accumulators: vec![("morawetz", 7.0)],
            edge_mass: 1e-300,
        }
    }

    #[test]
    fn header_order_and_names() {
        let h = diagnostics_header(&[3.0, 4.5], &["morawetz"]);
        assert_eq!(
            h,
            [
                "t",
                "mass",
                "energy",
                "h1",
                "l_inf",
                "l_3",
                "l_4.5",
                "local_mass_sup",
                "gn_ratio",
                "st_morawetz",
                "edge_mass"
            ]
        );
    }

    #[test]
    fn values_round_trip_exactly() {
        let bytes = diagnostics_csv(&[rec(0.0), rec(0.5)], &[3.0, 4.5], &["morawetz"]).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("0.0000000000000000e0,3.3333333333333331e-1"));
        let table = Table::parse(&bytes).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.column("mass").unwrap(), vec![1.0 / 3.0; 2]);
        assert!(table.column("gn_ratio").unwrap()[0].is_nan());
        assert_eq!(
            table.series("l_4.5").unwrap(),
            vec![(0.0, 0.25), (0.5, 0.25)]
        );
    }

    #[test]
    fn empty_series_keeps_schema() {
        let bytes = diagnostics_csv(&[], &[3.0], &["morawetz"]).unwrap();
        let table = Table::parse(&bytes).unwrap();
        assert_eq!(table.columns.len(), 10);
        assert!(table.rows.is_empty());
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            Table::parse(b"x,y\n1,2\n"),
            Err(RecordError::Header(_))
        ));
        assert!(matches!(
            Table::parse(b"t,y\n1,abc\n"),
            Err(RecordError::Value { row: 1, .. })
        ));
    }
}
