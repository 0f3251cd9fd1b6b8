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

//! Record-level deltas between datasets.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codec::{self, put_str, put_u32, put_u64, Reader, DELTA_MAGIC};
use crate::error::{Error, Result};
use crate::model::{ContentHash, Dataset, ForeignKey, Record, Table, Value, VersionId};

/// One edit to one key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordOp {
    Insert {
        record: Arc<Record>,
    },
    Delete {
        key: String,
        old_state: ContentHash,
    },
    /// Changes only the listed attributes. `set` and `unset` are disjoint.
    Update {
        key: String,
        set: BTreeMap<String, Value>,
        unset: Vec<String>,
        old_state: ContentHash,
        new_state: ContentHash,
    },
}

impl RecordOp {
    pub fn key(&self) -> &str {
        match self {
            RecordOp::Insert { record } => record.key(),
            RecordOp::Delete { key, .. } | RecordOp::Update { key, .. } => key,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RecordOp::Insert { .. } => "insert",
            RecordOp::Delete { .. } => "delete",
            RecordOp::Update { .. } => "update",
        }
    }

    /// Names of attributes an update touches; empty for inserts and deletes.
    pub fn changed_attrs(&self) -> BTreeSet<&str> {
        match self {
            RecordOp::Update { set, unset, .. } => set
                .keys()
                .map(String::as_str)
                .chain(unset.iter().map(String::as_str))
                .collect(),
            _ => BTreeSet::new(),
        }
    }

    /// Edit that turns `old` into `new` (same key), or `None` if they are equal.
    pub fn between(old: Option<&Arc<Record>>, new: Option<&Arc<Record>>) -> Option<RecordOp> {
        match (old, new) {
            (None, None) => None,
            (None, Some(n)) => Some(RecordOp::Insert { record: n.clone() }),
            (Some(o), None) => Some(RecordOp::Delete {
                key: o.key().to_string(),
                old_state: o.state_id(),
            }),
            (Some(o), Some(n)) => {
                if Arc::ptr_eq(o, n) || o.state_id() == n.state_id() {
                    return None;
                }
                let mut set = BTreeMap::new();
                for (name, value) in n.attrs() {
                    if o.get(name) != Some(value) {
                        set.insert(name.clone(), value.clone());
                    }
                }
                let unset: Vec<String> = o
                    .attrs()
                    .keys()
                    .filter(|name| n.get(name).is_none())
                    .cloned()
                    .collect();
                Some(RecordOp::Update {
                    key: o.key().to_string(),
                    set,
                    unset,
                    old_state: o.state_id(),
                    new_state: n.state_id(),
                })
            }
        }
    }
}

/// Whether a delta creates, drops or edits a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableChange {
    Existing,
    Created,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDelta {
    pub change: TableChange,
    pub ops: BTreeMap<String, RecordOp>,
}

impl TableDelta {
    fn existing() -> Self {
        TableDelta {
            change: TableChange::Existing,
            ops: BTreeMap::new(),
        }
    }
}

/// Edit script from one dataset to another, at most one op per (table, key).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delta {
    pub from: Option<VersionId>,
    pub to: Option<VersionId>,
    pub tables: BTreeMap<String, TableDelta>,
    /// New constraint list, when it changed.
    pub constraints: Option<Vec<ForeignKey>>,
}

impl Delta {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_none()
            && self
                .tables
                .values()
                .all(|t| t.ops.is_empty() && t.change == TableChange::Existing)
    }

    pub fn op_count(&self) -> usize {
        self.tables.values().map(|t| t.ops.len()).sum()
    }

    pub fn ops(&self) -> impl Iterator<Item = (&str, &RecordOp)> {
        self.tables
            .iter()
            .flat_map(|(t, td)| td.ops.values().map(move |op| (t.as_str(), op)))
    }

    pub fn op(&self, table: &str, key: &str) -> Option<&RecordOp> {
        self.tables.get(table).and_then(|t| t.ops.get(key))
    }

    pub fn changed_tables(&self) -> Vec<String> {
        self.tables
            .iter()
            .filter(|(_, t)| !t.ops.is_empty() || t.change != TableChange::Existing)
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// Replaces (or clears) the op for one key.
    pub fn set_op(&mut self, table: &str, key: &str, op: Option<RecordOp>) {
        match op {
            Some(op) => {
                self.tables
                    .entry(table.to_string())
                    .or_insert_with(TableDelta::existing)
                    .ops
                    .insert(key.to_string(), op);
            }
            None => {
                if let Some(t) = self.tables.get_mut(table) {
                    t.ops.remove(key);
                    if t.ops.is_empty() && t.change == TableChange::Existing {
                        self.tables.remove(table);
                    }
                }
            }
        }
    }

    pub fn encode(&self, compress: bool) -> Vec<u8> {
        let mut out = Vec::new();
        put_u64(&mut out, self.from.unwrap_or(0));
        put_u64(&mut out, self.to.unwrap_or(0));
        put_u32(&mut out, self.tables.len());
        for (name, td) in &self.tables {
            put_str(&mut out, name);
            out.push(match td.change {
                TableChange::Existing => 0,
                TableChange::Created => 1,
                TableChange::Dropped => 2,
            });
            put_u32(&mut out, td.ops.len());
            for op in td.ops.values() {
                match op {
                    RecordOp::Insert { record } => {
                        out.push(0);
                        codec::encode_record_into(&mut out, record);
                    }
                    RecordOp::Delete { key, old_state } => {
                        out.push(1);
                        put_str(&mut out, key);
                        out.extend_from_slice(&old_state.0);
                    }
                    RecordOp::Update {
                        key,
                        set,
                        unset,
                        old_state,
                        new_state,
                    } => {
                        out.push(2);
                        put_str(&mut out, key);
                        out.extend_from_slice(&old_state.0);
                        out.extend_from_slice(&new_state.0);
                        put_u32(&mut out, set.len());
                        for (n, v) in set {
                            put_str(&mut out, n);
                            codec::encode_value(&mut out, v);
                        }
                        put_u32(&mut out, unset.len());
                        for n in unset {
                            put_str(&mut out, n);
                        }
                    }
                }
            }
        }
        match &self.constraints {
            None => out.push(0),
            Some(list) => {
                out.push(1);
                put_u32(&mut out, list.len());
                for fk in list {
                    put_str(&mut out, &fk.from_table);
                    put_str(&mut out, &fk.from_attr);
                    put_str(&mut out, &fk.to_table);
                }
            }
        }
        codec::frame(DELTA_MAGIC, &out, compress)
    }

    pub fn decode(bytes: &[u8]) -> Result<Delta> {
        let body = codec::unframe(DELTA_MAGIC, bytes)?;
        let mut r = Reader::new(&body);
        let nz = |v: u64| (v != 0).then_some(v);
        let from = nz(r.u64()?);
        let to = nz(r.u64()?);
        let mut tables = BTreeMap::new();
        for _ in 0..r.u32()? {
            let name = r.str()?;
            let change = match r.u8()? {
                0 => TableChange::Existing,
                1 => TableChange::Created,
                2 => TableChange::Dropped,
                b => return Err(Error::Decode(format!("bad table change byte {b}"))),
            };
            let mut ops = BTreeMap::new();
            for _ in 0..r.u32()? {
                let op = match r.u8()? {
                    0 => RecordOp::Insert {
                        record: Arc::new(r.record()?),
                    },
                    1 => RecordOp::Delete {
                        key: r.str()?,
                        old_state: r.hash()?,
                    },
                    2 => {
                        let key = r.str()?;
                        let old_state = r.hash()?;
                        let new_state = r.hash()?;
                        let mut set = BTreeMap::new();
                        for _ in 0..r.u32()? {
                            let n = r.str()?;
                            set.insert(n, r.value()?);
                        }
                        let mut unset = Vec::new();
                        for _ in 0..r.u32()? {
                            unset.push(r.str()?);
                        }
                        RecordOp::Update {
                            key,
                            set,
                            unset,
                            old_state,
                            new_state,
                        }
                    }
                    b => return Err(Error::Decode(format!("bad op tag {b}"))),
                };
                ops.insert(op.key().to_string(), op);
            }
            tables.insert(name, TableDelta { change, ops });
        }
        let constraints = match r.u8()? {
            0 => None,
            _ => {
                let mut list = Vec::new();
                for _ in 0..r.u32()? {
                    list.push(ForeignKey {
                        from_table: r.str()?,
                        from_attr: r.str()?,
                        to_table: r.str()?,
                    });
                }
                Some(list)
            }
        };
        if !r.is_empty() {
            return Err(Error::Decode("trailing bytes after delta".into()));
        }
        Ok(Delta {
            from,
            to,
            tables,
            constraints,
        })
    }
}

fn diff_table(base: Option<&Table>, target: Option<&Table>) -> BTreeMap<String, RecordOp> {
    let mut ops = BTreeMap::new();
    let mut base_iter = base.map(|t| t.keys().zip(t.records())).into_iter().flatten();
    let mut target_iter = target.map(|t| t.keys().zip(t.records())).into_iter().flatten();
    // Merge-join over the two sorted key sequences.
    let mut b = base_iter.next();
    let mut t = target_iter.next();
    loop {
        match (b, t) {
            (None, None) => break,
            (Some((bk, br)), None) => {
                ops.insert(bk.clone(), RecordOp::between(Some(br), None).unwrap());
                b = base_iter.next();
            }
            (None, Some((tk, tr))) => {
                ops.insert(tk.clone(), RecordOp::between(None, Some(tr)).unwrap());
                t = target_iter.next();
            }
            (Some((bk, br)), Some((tk, tr))) => match bk.cmp(tk) {
                std::cmp::Ordering::Less => {
                    ops.insert(bk.clone(), RecordOp::between(Some(br), None).unwrap());
                    b = base_iter.next();
                }
                std::cmp::Ordering::Greater => {
                    ops.insert(tk.clone(), RecordOp::between(None, Some(tr)).unwrap());
                    t = target_iter.next();
                }
                std::cmp::Ordering::Equal => {
                    if let Some(op) = RecordOp::between(Some(br), Some(tr)) {
                        ops.insert(bk.clone(), op);
                    }
                    b = base_iter.next();
                    t = target_iter.next();
                }
            },
        }
    }
    ops
}

/// Minimal key-level edit script turning `base` into `target`.
pub fn compute_delta(base: &Dataset, target: &Dataset) -> Delta {
    let names: BTreeSet<&String> = base.table_names().chain(target.table_names()).collect();
    let mut tables = BTreeMap::new();
    for name in names {
        let (b, t) = (base.table(name), target.table(name));
        let change = match (b, t) {
            (None, Some(_)) => TableChange::Created,
            (Some(_), None) => TableChange::Dropped,
            _ => TableChange::Existing,
        };
        let ops = diff_table(b, t);
        if !ops.is_empty() || change != TableChange::Existing {
            tables.insert(name.clone(), TableDelta { change, ops });
        }
    }
    let constraints =
        (base.constraints() != target.constraints()).then(|| target.constraints().to_vec());
    Delta {
        from: None,
        to: None,
        tables,
        constraints,
    }
}

fn mismatch(table: &str, key: &str, what: &str) -> Error {
    Error::DeltaMismatch(format!("{table}/{key}: {what}"))
}

fn check_state(table: &str, key: &str, rec: Option<&Arc<Record>>, expected: &ContentHash) -> Result<Arc<Record>> {
    let rec = rec.ok_or_else(|| mismatch(table, key, "record missing from base"))?;
    if rec.state_id() != *expected {
        return Err(mismatch(table, key, "base record state differs"));
    }
    Ok(rec.clone())
}

/// Applies `d` to `base`, verifying recorded base states.
pub fn apply_delta(base: &Dataset, d: &Delta) -> Result<Dataset> {
    let mut out = base.clone();
    for (name, td) in &d.tables {
        if td.change == TableChange::Created {
            if out.has_table(name) {
                return Err(Error::DeltaMismatch(format!("table {name} already exists")));
            }
            out.add_table(Table::new(name.clone())?)?;
        }
        let table = out
            .table_mut(name)
            .ok_or_else(|| Error::DeltaMismatch(format!("table {name} missing from base")))?;
        for (key, op) in &td.ops {
            match op {
                RecordOp::Insert { record } => {
                    table.insert_shared(record.clone())?;
                }
                RecordOp::Delete { old_state, .. } => {
                    check_state(name, key, table.get(key), old_state)?;
                    table.remove(key);
                }
                RecordOp::Update {
                    set,
                    unset,
                    old_state,
                    new_state,
                    ..
                } => {
                    let old = check_state(name, key, table.get(key), old_state)?;
                    let new = old.with_changes(set, unset)?;
                    if new.state_id() != *new_state {
                        return Err(mismatch(name, key, "updated state differs"));
                    }
                    table.upsert(Arc::new(new));
                }
            }
        }
        if td.change == TableChange::Dropped {
            if !table.is_empty() {
                return Err(Error::DeltaMismatch(format!(
                    "dropped table {name} still has records"
                )));
            }
            out.remove_table(name);
        }
    }
    if let Some(c) = &d.constraints {
        out.set_constraints(c.clone());
    }
    Ok(out)
}

/// Delta that undoes `d`, given the dataset `d` applies to.
pub fn invert_delta(d: &Delta, base: &Dataset) -> Result<Delta> {
    let mut tables = BTreeMap::new();
    for (name, td) in &d.tables {
        let base_table = base.table(name);
        if td.change != TableChange::Created && base_table.is_none() {
            return Err(Error::DeltaMismatch(format!("table {name} missing from base")));
        }
        let mut ops = BTreeMap::new();
        for (key, op) in &td.ops {
            let current = base_table.and_then(|t| t.get(key));
            let inv = match op {
                RecordOp::Insert { record } => {
                    if current.is_some() {
                        return Err(mismatch(name, key, "insert of existing key"));
                    }
                    RecordOp::Delete {
                        key: key.clone(),
                        old_state: record.state_id(),
                    }
                }
                RecordOp::Delete { old_state, .. } => RecordOp::Insert {
                    record: check_state(name, key, current, old_state)?,
                },
                RecordOp::Update {
                    set,
                    unset,
                    old_state,
                    new_state,
                    ..
                } => {
                    let old = check_state(name, key, current, old_state)?;
                    let mut back_set = BTreeMap::new();
                    let mut back_unset = Vec::new();
                    for attr in set.keys().chain(unset.iter()) {
                        match old.get(attr) {
                            Some(v) => {
                                back_set.insert(attr.clone(), v.clone());
                            }
                            None => back_unset.push(attr.clone()),
                        }
                    }
                    back_unset.sort();
                    RecordOp::Update {
                        key: key.clone(),
                        set: back_set,
                        unset: back_unset,
                        old_state: *new_state,
                        new_state: *old_state,
                    }
                }
            };
            ops.insert(key.clone(), inv);
        }
        let change = match td.change {
            TableChange::Created => TableChange::Dropped,
            TableChange::Dropped => TableChange::Created,
            TableChange::Existing => TableChange::Existing,
        };
        tables.insert(name.clone(), TableDelta { change, ops });
    }
    let constraints = d.constraints.as_ref().map(|_| base.constraints().to_vec());
    Ok(Delta {
        from: d.to,
        to: d.from,
        tables,
        constraints,
    })
}

/// Number of records that differ: inserts, deletes and in-place changes, each once.
pub fn diff_recs(a: &Dataset, b: &Dataset) -> u64 {
    compute_delta(a, b).op_count() as u64
}

/// `diff_recs` restricted to one table; a table absent on one side counts all its records.
pub fn diff_recs_table(a: &Dataset, b: &Dataset, table: &str) -> u64 {
    diff_table(a.table(table), b.table(table)).len() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(key: &str, pairs: &[(&str, i64)]) -> Record {
        Record::from_pairs(key, pairs.iter().map(|(n, v)| (*n, *v))).unwrap()
    }

    fn ds(records: Vec<Record>) -> Dataset {
        Dataset::from_tables([Table::with_records("T", records).unwrap()]).unwrap()
    }

    #[test]
    fn identical_datasets_have_empty_delta() {
        let d = ds(vec![rec("a", &[("x", 1)])]);
        assert!(compute_delta(&d, &d).is_empty());
        assert_eq!(apply_delta(&d, &Delta::new()).unwrap(), d);
        assert!(invert_delta(&Delta::new(), &d).unwrap().is_empty());
    }

    #[test]
    fn update_lists_only_changed_attrs() {
        let a = ds(vec![rec("k", &[("x", 1), ("y", 2), ("z", 3)])]);
        let b = ds(vec![rec("k", &[("x", 1), ("y", 5)])]);
        let d = compute_delta(&a, &b);
        match d.op("T", "k").unwrap() {
            RecordOp::Update { set, unset, .. } => {
                assert_eq!(set.keys().collect::<Vec<_>>(), ["y"]);
                assert_eq!(unset, &["z".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(apply_delta(&a, &d).unwrap(), b);
    }

    #[test]
    fn tampered_base_is_detected() {
        let a = ds(vec![rec("k", &[("x", 1)])]);
        let b = ds(vec![rec("k", &[("x", 2)])]);
        let d = compute_delta(&a, &b);
        let tampered = ds(vec![rec("k", &[("x", 9)])]);
        assert!(matches!(apply_delta(&tampered, &d), Err(Error::DeltaMismatch(_))));
        let gone = ds(vec![]);
        assert!(matches!(apply_delta(&gone, &d), Err(Error::DeltaMismatch(_))));
    }

    #[test]
    fn duplicate_insert_is_rejected() {
        let a = ds(vec![]);
        let b = ds(vec![rec("k", &[])]);
        let d = compute_delta(&a, &b);
        assert!(matches!(apply_delta(&b, &d), Err(Error::DuplicateInsert { .. })));
    }

    #[test]
    fn table_creation_and_drop_round_trip() {
        let a = ds(vec![rec("k", &[("x", 1)])]);
        let b = Dataset::from_tables([Table::new("U").unwrap()]).unwrap();
        let d = compute_delta(&a, &b);
        assert_eq!(d.tables["U"].change, TableChange::Created);
        assert_eq!(d.tables["T"].change, TableChange::Dropped);
        assert_eq!(apply_delta(&a, &d).unwrap(), b);
        let inv = invert_delta(&d, &a).unwrap();
        assert_eq!(apply_delta(&b, &inv).unwrap(), a);
        // one record in a table present on one side only
        assert_eq!(diff_recs(&a, &b), 1);
        assert_eq!(diff_recs_table(&a, &b, "T"), 1);
        assert_eq!(diff_recs_table(&a, &b, "U"), 0);
    }

    #[test]
    fn modified_record_counts_once() {
        let a = ds(vec![rec("k", &[("x", 1)]), rec("j", &[])]);
        let b = ds(vec![rec("k", &[("x", 2)]), rec("i", &[])]);
        assert_eq!(diff_recs(&a, &b), 3);
        assert_eq!(diff_recs(&b, &a), 3);
    }

    #[test]
    fn encoding_round_trips() {
        let a = ds(vec![rec("k", &[("x", 1), ("y", 1)]), rec("j", &[])]);
        let mut b = ds(vec![rec("k", &[("x", 2)]), rec("i", &[("q", 4)])]);
        b.set_constraints(vec![ForeignKey {
            from_table: "T".into(),
            from_attr: "x".into(),
            to_table: "T".into(),
        }]);
        let mut d = compute_delta(&a, &b);
        d.from = Some(3);
        d.to = Some(4);
        for compress in [false, true] {
            let bytes = d.encode(compress);
            assert_eq!(&bytes[..8], DELTA_MAGIC);
            assert_eq!(bytes[8], compress as u8);
            assert_eq!(Delta::decode(&bytes).unwrap(), d);
        }
    }
}
