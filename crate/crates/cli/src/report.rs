use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::commands::SUMMARY_FILE;
use crate::manifest::RunManifest;
use crate::CliError;

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// CSV file as `{column: [values]}`; empty fields become `null`.
fn read_series(path: &Path) -> Result<Value, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| runtime(path, e))?;
    let headers: Vec<String> = r.headers().map_err(|e| runtime(path, e))?.iter().map(String::from).collect();
    let mut cols: Vec<Vec<Value>> = vec![Vec::new(); headers.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| runtime(path, e))?;
        for (col, field) in cols.iter_mut().zip(rec.iter()) {
            col.push(if field.is_empty() {
                Value::Null
            } else {
                let v: f64 = field.parse().map_err(|e| runtime(path, format!("`{field}`: {e}")))?;
                json!(v)
            });
        }
    }
    Ok(Value::Object(headers.into_iter().zip(cols.into_iter().map(Value::Array)).collect()))
}

/// Merges Monte Carlo output directories that share one config hash.
pub fn merge(inputs: &[PathBuf]) -> Result<Value, CliError> {
    let mut hash: Option<String> = None;
    let mut manifests = Vec::new();
    let mut rows: Vec<Value> = Vec::new();
    let mut seen = BTreeMap::new();
    let mut series = Map::new();
    for dir in inputs {
        let m = RunManifest::read(dir)?;
        match &hash {
            None => hash = Some(m.config_hash.clone()),
            Some(h) if *h != m.config_hash => {
                return Err(CliError::Runtime(format!(
                    "{}: config hash {} does not match {h}",
                    dir.display(),
                    m.config_hash
                )))
            }
            Some(_) => {}
        }
        if m.command != "montecarlo" {
            return Err(runtime(dir, format!("expected montecarlo output, found `{}`", m.command)));
        }
        for cell in &m.cells {
            if let Some(prev) = seen.insert(cell.clone(), dir.clone()) {
                return Err(runtime(dir, format!("cell {cell} already present in {}", prev.display())));
            }
        }
        let path = dir.join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| runtime(&path, e))?;
        let summary: Value = serde_json::from_str(&text).map_err(|e| runtime(&path, e))?;
        let table_rows = summary
            .pointer("/table/rows")
            .and_then(Value::as_array)
            .ok_or_else(|| runtime(&path, "missing table rows"))?;
        rows.extend(table_rows.iter().cloned());
        for name in m.outputs.iter().filter(|n| n.starts_with("series_")) {
            let key = name.trim_start_matches("series_").trim_end_matches(".csv").replace('_', "/");
            series.insert(key, read_series(&dir.join(name))?);
        }
        manifests.push(serde_json::to_value(&m)?);
    }
    Ok(json!({
        "config_hash": hash.unwrap_or_default(),
        "manifests": manifests,
        "table": { "rows": rows },
        "series": series,
    }))
}

pub fn run(inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let report = merge(inputs)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| runtime(out, e))?;
    Ok(())
}
