// Copyright 2026 DSVC Contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! CSV and JSON-lines ingestion and export.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use dsvc_core::{Dataset, Record, Table, Value};

use crate::args::DataFormat;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnType {
    Int,
    Float,
    Text,
}

fn is_int(cell: &str) -> bool {
    let digits = cell.strip_prefix('-').unwrap_or(cell);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn is_float(cell: &str) -> bool {
    cell.parse::<f64>().is_ok_and(f64::is_finite)
}

fn infer(cells: &[&str]) -> ColumnType {
    let filled = || cells.iter().filter(|c| !c.is_empty());
    if filled().all(|c| is_int(c)) && filled().all(|c| c.parse::<i64>().is_ok()) {
        ColumnType::Int
    } else if filled().all(|c| is_float(c)) {
        ColumnType::Float
    } else {
        ColumnType::Text
    }
}

fn typed(cell: &str, ty: ColumnType) -> Value {
    match ty {
        ColumnType::Int => Value::Int(cell.parse().expect("checked by infer")),
        ColumnType::Float => Value::Float(cell.parse().expect("checked by infer")),
        ColumnType::Text => Value::Text(cell.to_string()),
    }
}

/// Value of a single `ATTR=VALUE` argument, typed like a one-cell column.
pub fn parse_value(cell: &str) -> Value {
    typed(cell, infer(&[cell]))
}

pub fn parse_assignment(arg: &str) -> Result<(String, Value), CliError> {
    let (name, value) = arg
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("expected ATTR=VALUE, got `{arg}`")))?;
    if name.is_empty() {
        return Err(CliError::usage(format!("empty attribute name in `{arg}`")));
    }
    Ok((name.to_string(), parse_value(value)))
}

fn table_files(dir: &Path, ext: &str) -> Result<Vec<(String, std::path::PathBuf)>, CliError> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::usage(e.to_string()))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path));
            }
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(CliError::usage(format!("no .{ext} files in {}", dir.display())));
    }
    Ok(out)
}

/// Reads one CSV per table. The key column is kept as an attribute too.
pub fn read_csv_dir(dir: &Path, key: &str) -> Result<Dataset, CliError> {
    let mut ds = Dataset::new();
    for (name, path) in table_files(dir, "csv")? {
        let mut reader = csv::Reader::from_path(&path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let key_at = header
            .iter()
            .position(|h| h == key)
            .ok_or_else(|| CliError::usage(format!("{}: no `{key}` column", path.display())))?;
        let rows: Vec<csv::StringRecord> = reader
            .records()
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let types: Vec<ColumnType> = (0..header.len())
            .map(|i| infer(&rows.iter().map(|r| r.get(i).unwrap_or("")).collect::<Vec<_>>()))
            .collect();
        let mut table = Table::new(name)?;
        for row in rows {
            let k = row.get(key_at).unwrap_or("");
            if k.is_empty() {
                return Err(CliError::usage(format!("{}: empty key", path.display())));
            }
            let mut attrs = BTreeMap::new();
            for (i, cell) in row.iter().enumerate() {
                if !cell.is_empty() {
                    attrs.insert(header[i].clone(), typed(cell, types[i]));
                }
            }
            table.insert(Record::new(k, attrs)?)?;
        }
        ds.add_table(table)?;
    }
    Ok(ds)
}

fn json_value(v: &serde_json::Value, path: &Path) -> Result<Value, CliError> {
    Ok(match v {
        serde_json::Value::Null => Value::Null,
        serde_json::Value::Bool(b) => Value::Bool(*b),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
        },
        serde_json::Value::String(s) => Value::Text(s.clone()),
        _ => {
            return Err(CliError::usage(format!(
                "{}: nested values are not supported",
                path.display()
            )))
        }
    })
}

/// Reads one JSON-lines file per table; each line is a flat object.
pub fn read_jsonl_dir(dir: &Path, key: &str) -> Result<Dataset, CliError> {
    let mut ds = Dataset::new();
    for (name, path) in table_files(dir, "jsonl")? {
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let mut table = Table::new(name)?;
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let where_ = || format!("{}:{}", path.display(), n + 1);
            let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(line)
                .map_err(|e| CliError::usage(format!("{}: {e}", where_())))?;
            let k = match obj.get(key) {
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(serde_json::Value::Number(n)) => n.to_string(),
                _ => return Err(CliError::usage(format!("{}: missing `{key}`", where_()))),
            };
            let mut attrs = BTreeMap::new();
            for (a, v) in &obj {
                attrs.insert(a.clone(), json_value(v, &path)?);
            }
            table.insert(Record::new(k, attrs)?)?;
        }
        ds.add_table(table)?;
    }
    Ok(ds)
}

pub fn read_dir(dir: &Path, format: DataFormat, key: &str) -> Result<Dataset, CliError> {
    match format {
        DataFormat::Csv => read_csv_dir(dir, key),
        DataFormat::Jsonl => read_jsonl_dir(dir, key),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Float(x) => format!("{x:?}"),
        other => dsvc_vql::output::value_text(other),
    }
}

/// Writes `<table>.csv` or `<table>.jsonl` files into `out`.
pub fn write_dir(ds: &Dataset, out: &Path, format: DataFormat, key: &str) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::usage(format!("{}: {e}", out.display())))?;
    for table in ds.tables() {
        let attrs: std::collections::BTreeSet<&String> = table
            .records()
            .flat_map(|r| r.attrs().keys())
            .filter(|a| a.as_str() != key)
            .collect();
        let io = |e: std::io::Error| CliError::usage(format!("{}: {e}", out.display()));
        match format {
            DataFormat::Csv => {
                let path = out.join(format!("{}.csv", table.name()));
                let mut w = csv::Writer::from_path(&path)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                let mut header = vec![key.to_string()];
                header.extend(attrs.iter().map(|a| a.to_string()));
                w.write_record(&header).map_err(|e| CliError::usage(e.to_string()))?;
                for r in table.records() {
                    let mut row = vec![r.get(key).map(cell).unwrap_or_else(|| r.key().to_string())];
                    row.extend(attrs.iter().map(|a| r.get(a).map(cell).unwrap_or_default()));
                    w.write_record(&row).map_err(|e| CliError::usage(e.to_string()))?;
                }
                w.flush().map_err(io)?;
            }
            DataFormat::Jsonl => {
                let path = out.join(format!("{}.jsonl", table.name()));
                let mut text = String::new();
                for r in table.records() {
                    let mut obj = serde_json::Map::new();
                    obj.insert(
                        key.to_string(),
                        r.get(key)
                            .map(dsvc_vql::output::value_json)
                            .unwrap_or_else(|| r.key().into()),
                    );
                    for a in &attrs {
                        if let Some(v) = r.get(a) {
                            obj.insert(a.to_string(), dsvc_vql::output::value_json(v));
                        }
                    }
                    text.push_str(&serde_json::Value::Object(obj).to_string());
                    text.push('\n');
                }
                fs::write(&path, text).map_err(io)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_typing() {
        assert_eq!(infer(&["1", "-2", ""]), ColumnType::Int);
        assert_eq!(infer(&["1", "2.5"]), ColumnType::Float);
        assert_eq!(infer(&["1", "x"]), ColumnType::Text);
        assert_eq!(infer(&["+1"]), ColumnType::Float);
        assert_eq!(infer(&["99999999999999999999"]), ColumnType::Float);
        assert_eq!(parse_value("007"), Value::Int(7));
        assert_eq!(parse_value("Sam"), Value::Text("Sam".into()));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("in");
        fs::create_dir(&src).unwrap();
        fs::write(src.join("R.csv"), "id,name,age,score\n1,Sam,30,1.5\n2,\"A, B\",,2\n").unwrap();
        let ds = read_csv_dir(&src, "id").unwrap();
        let r = ds.table("R").unwrap().get("2").unwrap();
        assert_eq!(r.get("age"), None);
        assert_eq!(r.get("score"), Some(&Value::Float(2.0)));
        assert_eq!(r.get("id"), Some(&Value::Int(2)));
        let out = dir.path().join("out");
        write_dir(&ds, &out, DataFormat::Csv, "id").unwrap();
        let again = read_csv_dir(&out, "id").unwrap();
        assert_eq!(dsvc_core::diff_recs(&ds, &again), 0);
        write_dir(&ds, &out, DataFormat::Jsonl, "id").unwrap();
        let again = read_jsonl_dir(&out, "id").unwrap();
        assert_eq!(dsvc_core::diff_recs(&ds, &again), 0);
    }

    #[test]
    fn nested_json_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("R.jsonl"), "{\"id\":\"1\",\"x\":{\"y\":1}}\n").unwrap();
        assert!(read_jsonl_dir(dir.path(), "id").is_err());
    }
}
