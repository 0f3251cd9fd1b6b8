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

use std::fmt::Write;

use dsvc_core::Value;

use crate::eval::ResultSet;

fn escape_tsv(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Plain-text rendering of a value.
pub fn value_text(v: &Value) -> String {
    match v {
        Value::Null => "NULL".to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Int(n) => n.to_string(),
        Value::Float(x) => format!("{x:?}"),
        Value::Text(s) => s.clone(),
        Value::Bytes(b) => b.iter().fold(String::from("0x"), |mut s, byte| {
            let _ = write!(s, "{byte:02x}");
            s
        }),
    }
}

pub fn value_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Null => serde_json::Value::Null,
        Value::Bool(b) => (*b).into(),
        Value::Int(n) => (*n).into(),
        Value::Float(x) => serde_json::Number::from_f64(*x)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null),
        Value::Text(s) => s.clone().into(),
        Value::Bytes(_) => value_text(v).into(),
    }
}

impl ResultSet {
    /// Header line, then one line per row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.columns.iter().map(|c| escape_tsv(c)).collect();
        out.push_str(&header.join("\t"));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| escape_tsv(&value_text(v))).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    /// `{"columns": [..]}`, then one JSON array per row.
    pub fn to_json_lines(&self) -> String {
        let mut out = serde_json::json!({ "columns": self.columns }).to_string();
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<serde_json::Value> = row.iter().map(value_json).collect();
            out.push_str(&serde_json::Value::Array(cells).to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_escapes_separators() {
        let rs = ResultSet {
            columns: vec!["a".into(), "b".into()],
            rows: vec![vec![Value::Text("x\ty\nz\\".into()), Value::Null]],
        };
        assert_eq!(rs.to_tsv(), "a\tb\nx\\ty\\nz\\\\\tNULL\n");
    }

    #[test]
    fn json_lines() {
        let rs = ResultSet {
            columns: vec!["VNUM".into()],
            rows: vec![vec![Value::Int(3)], vec![Value::Int(5)]],
        };
        assert_eq!(rs.to_json_lines(), "{\"columns\":[\"VNUM\"]}\n[3]\n[5]\n");
    }
}
