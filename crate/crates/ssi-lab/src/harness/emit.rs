//! Tidy plot-data emission. One file per figure panel, bytewise
//! deterministic for a given record set: floats are printed in the shortest
//! round-trip form and writes go through a temp file plus rename, so
//! re-emission overwrites identically.

use std::path::{Path, PathBuf};

use crate::harness::config::OutputFormat;
use crate::{Error, Result};

/// A tidy table: named columns and string-rendered rows.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest-round-trip float rendering; empty string for missing values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Write the table under `dir` in the requested format, returning the file
/// path. Refuses to write an empty table.
pub fn emit_table(table: &Table, dir: &Path, format: OutputFormat) -> Result<PathBuf> {
    if table.rows.is_empty() {
        return Err(Error::Config(format!(
            "emit: table '{}' has no rows",
            table.name
        )));
    }
    std::fs::create_dir_all(dir)?;
    let (path, bytes) = match format {
        OutputFormat::Csv => {
            let path = dir.join(format!("{}.csv", table.name));
            let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
            wtr.write_record(&table.columns)
                .map_err(|e| Error::Config(format!("csv write: {e}")))?;
            for row in &table.rows {
                wtr.write_record(row)
                    .map_err(|e| Error::Config(format!("csv write: {e}")))?;
            }
            let bytes = wtr
                .into_inner()
                .map_err(|e| Error::Config(format!("csv flush: {e}")))?;
            (path, bytes)
        }
        OutputFormat::Json => {
            let path = dir.join(format!("{}.json", table.name));
            let objects: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|row| {
                    let map: serde_json::Map<String, serde_json::Value> = table
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.clone(), serde_json::Value::String(v.clone())))
                        .collect();
                    serde_json::Value::Object(map)
                })
                .collect();
            let mut bytes = serde_json::to_vec_pretty(&objects)?;
            bytes.push(b'\n');
            (path, bytes)
        }
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &bytes)?;
    std::fs::rename(&tmp, &path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_emission_is_idempotent() {
        let tmp = std::env::temp_dir().join(format!("ssi-lab-emit-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&tmp);
        let mut t = Table::new("gain", &["L", "tau_tied", "tau_untied", "gain", "policy"]);
        t.push_row(vec![
            "2".into(),
            fmt_f64(100.0),
            fmt_f64(400.0),
            fmt_f64(4.0),
            "optimal".into(),
        ]);
        let p1 = emit_table(&t, &tmp, OutputFormat::Csv).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let p2 = emit_table(&t, &tmp, OutputFormat::Csv).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
        assert!(String::from_utf8(b1)
            .unwrap()
            .starts_with("L,tau_tied,tau_untied,gain,policy\n"));
        let _ = std::fs::remove_dir_all(&tmp);
    }

    #[test]
    fn empty_table_is_an_error() {
        let tmp = std::env::temp_dir().join("ssi-lab-emit-empty");
        let t = Table::new("phase", &["omega", "a", "label", "p_semantic", "n_runs"]);
        assert!(emit_table(&t, &tmp, OutputFormat::Csv).is_err());
    }

    #[test]
    fn json_mirrors_rows_as_objects() {
        let tmp = std::env::temp_dir().join(format!("ssi-lab-emitj-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&tmp);
        let mut t = Table::new("phase", &["omega", "a", "label", "p_semantic", "n_runs"]);
        t.push_row(vec![
            fmt_f64(0.64),
            fmt_f64(1.0),
            "global-semantic".into(),
            fmt_opt(Some(0.5)),
            "32".into(),
        ]);
        let p = emit_table(&t, &tmp, OutputFormat::Json).unwrap();
        let v: Vec<serde_json::Value> =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v[0]["omega"], "0.64");
        assert_eq!(v[0]["label"], "global-semantic");
        let _ = std::fs::remove_dir_all(&tmp);
    }
}
