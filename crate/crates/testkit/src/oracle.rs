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

//! Datasets as plain nested maps, with brute-force edit and merge semantics.

use std::collections::{BTreeMap, BTreeSet};

use dsvc_core::repo::Edit;
use dsvc_core::{Dataset, Value};

pub type Row = BTreeMap<String, Value>;
/// table -> key -> attributes
pub type Plain = BTreeMap<String, BTreeMap<String, Row>>;

pub fn plain(ds: &Dataset) -> Plain {
    ds.tables()
        .map(|t| {
            let rows = t
                .records()
                .map(|r| (r.key().to_string(), r.attrs().clone()))
                .collect();
            (t.name().to_string(), rows)
        })
        .collect()
}

fn matches(row: &Row, key: &str, pred: &dsvc_core::predicate::Predicate) -> bool {
    use dsvc_core::predicate::Column;
    pred.clauses.iter().all(|c| {
        let v = match &c.column {
            Column::Key => Value::Text(key.to_string()),
            Column::Attr(a) => match row.get(a) {
                Some(v) => v.clone(),
                None => return false,
            },
        };
        crate::oracle::loose_cmp(&v, &c.value).is_some_and(|o| c.op.holds(o))
    })
}

/// Comparison used by the oracles: numbers compare across int and float,
/// otherwise both sides must have the same type; null compares with nothing.
pub fn loose_cmp(a: &Value, b: &Value) -> Option<std::cmp::Ordering> {
    use Value::*;
    match (a, b) {
        (Int(x), Int(y)) => Some(x.cmp(y)),
        (Float(x), Float(y)) => x.partial_cmp(y),
        (Int(x), Float(y)) => cmp_exact(*x, *y),
        (Float(x), Int(y)) => cmp_exact(*y, *x).map(|o| o.reverse()),
        (Text(x), Text(y)) => Some(x.cmp(y)),
        (Bool(x), Bool(y)) => Some(x.cmp(y)),
        (Bytes(x), Bytes(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

/// Exact comparison of an integer with a float, via i128 where the float is integral.
fn cmp_exact(i: i64, f: f64) -> Option<std::cmp::Ordering> {
    use std::cmp::Ordering;
    if f.is_nan() {
        return None;
    }
    if f >= 9.3e18 {
        return Some(Ordering::Less);
    }
    if f <= -9.3e18 {
        return Some(Ordering::Greater);
    }
    let fl = f.floor();
    let whole = fl as i128;
    match (i as i128).cmp(&whole) {
        Ordering::Equal if f > fl => Some(Ordering::Less),
        o => Some(o),
    }
}

/// Applies one edit to a plain dataset; `false` when it does not apply.
pub fn apply_edit(p: &mut Plain, edit: &Edit) -> bool {
    match edit {
        Edit::Insert { table, record } => match p.get_mut(table) {
            Some(t) if !t.contains_key(record.key()) => {
                t.insert(record.key().to_string(), record.attrs().clone());
                true
            }
            _ => false,
        },
        Edit::Delete { table, key } => p
            .get_mut(table)
            .is_some_and(|t| t.remove(key).is_some()),
        Edit::Update {
            table,
            key,
            set,
            unset,
        } => match p.get_mut(table).and_then(|t| t.get_mut(key)) {
            Some(row) => {
                for (k, v) in set {
                    row.insert(k.clone(), v.clone());
                }
                for k in unset {
                    row.remove(k);
                }
                true
            }
            None => false,
        },
        Edit::UpdateWhere {
            table,
            predicate,
            set,
        } => match p.get_mut(table) {
            Some(t) => {
                for (key, row) in t.iter_mut() {
                    if matches(row, key, predicate) {
                        for (k, v) in set {
                            row.insert(k.clone(), v.clone());
                        }
                    }
                }
                true
            }
            None => false,
        },
        Edit::CreateTable { table } => p.insert(table.clone(), BTreeMap::new()).is_none(),
        Edit::DropTable { table } => p.remove(table).is_some(),
        Edit::SetConstraints { .. } => true,
    }
}

/// Row-granularity three-way merge: a key changed differently on both sides conflicts.
pub fn merge_rows(base: &Plain, a: &Plain, b: &Plain) -> Result<Plain, Vec<(String, String)>> {
    let mut out = Plain::new();
    let mut conflicts = Vec::new();
    let tables: BTreeSet<&String> = base.keys().chain(a.keys()).chain(b.keys()).collect();
    let empty = BTreeMap::new();
    for t in tables {
        let (tb, ta, tbb) = (
            base.get(t).unwrap_or(&empty),
            a.get(t).unwrap_or(&empty),
            b.get(t).unwrap_or(&empty),
        );
        let keys: BTreeSet<&String> = tb.keys().chain(ta.keys()).chain(tbb.keys()).collect();
        let mut rows = BTreeMap::new();
        for k in keys {
            let (x, y, z) = (tb.get(k), ta.get(k), tbb.get(k));
            let pick = if y == z {
                y
            } else if y == x {
                z
            } else if z == x {
                y
            } else {
                conflicts.push((t.clone(), k.clone()));
                x
            };
            if let Some(r) = pick {
                rows.insert(k.clone(), r.clone());
            }
        }
        let exists = |d: &Plain| d.contains_key(t);
        let keep = if exists(a) == exists(base) { exists(b) } else { exists(a) };
        if keep || !rows.is_empty() {
            out.insert(t.clone(), rows);
        }
    }
    if conflicts.is_empty() {
        Ok(out)
    } else {
        Err(conflicts)
    }
}

/// Number of (table, key) pairs whose rows differ.
pub fn diff_count(a: &Plain, b: &Plain) -> u64 {
    let empty = BTreeMap::new();
    let tables: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let mut n = 0;
    for t in tables {
        let (ta, tb) = (a.get(t).unwrap_or(&empty), b.get(t).unwrap_or(&empty));
        let keys: BTreeSet<&String> = ta.keys().chain(tb.keys()).collect();
        n += keys.into_iter().filter(|k| ta.get(*k) != tb.get(*k)).count() as u64;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_float_comparison() {
        use std::cmp::Ordering::*;
        assert_eq!(loose_cmp(&Value::Int(1), &Value::Float(1.5)), Some(Less));
        assert_eq!(loose_cmp(&Value::Int(2), &Value::Float(2.0)), Some(Equal));
        assert_eq!(loose_cmp(&Value::Float(-0.5), &Value::Int(-1)), Some(Greater));
        assert_eq!(loose_cmp(&Value::Int(1), &Value::Text("1".into())), None);
        assert_eq!(loose_cmp(&Value::Null, &Value::Null), None);
    }
}
