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

//! Read path that treats each storage segment as a table of rows carrying a
//! deleted bit, and reads a version as the union of its chain's segments
//! where later segments override earlier ones per key.
//!
//! Updates become a delete marker followed by a re-insertion of the full
//! new row. This is an independent reading of the same objects that
//! `VersionStore::materialize` decodes through `apply_delta`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::codec;
use crate::delta::{Delta, RecordOp, TableChange};
use crate::error::{Error, Result};
use crate::model::{Dataset, ForeignKey, Record, Table, VersionId};
use crate::store::{Placement, VersionStore};

#[derive(Debug, Clone)]
struct TombstoneRow {
    table: String,
    key: String,
    record: Option<Arc<Record>>,
    deleted: bool,
}

#[derive(Default)]
struct Segment {
    rows: Vec<TombstoneRow>,
    latest: HashMap<(String, String), usize>,
    created: BTreeSet<String>,
    dropped: BTreeSet<String>,
    constraints: Option<Vec<ForeignKey>>,
}

impl Segment {
    fn push(&mut self, row: TombstoneRow) {
        self.latest
            .insert((row.table.clone(), row.key.clone()), self.rows.len());
        self.rows.push(row);
    }
}

fn visible<'a>(segments: &'a [Segment], table: &str, key: &str) -> Option<&'a Arc<Record>> {
    let probe = (table.to_string(), key.to_string());
    for seg in segments.iter().rev() {
        if let Some(&i) = seg.latest.get(&probe) {
            let row = &seg.rows[i];
            return if row.deleted { None } else { row.record.as_ref() };
        }
    }
    None
}

/// Reads `v` through the tombstone-union view of its storage chain.
pub fn tombstone_read(store: &VersionStore, v: VersionId) -> Result<Dataset> {
    let chain = store.resolve_chain(v)?;
    let mut segments: Vec<Segment> = Vec::with_capacity(chain.len());
    for node in chain.iter().rev() {
        let bytes = store.objects().get(&node.object)?;
        let mut seg = Segment::default();
        match node.placement {
            Placement::Materialize => {
                let ds = codec::decode_snapshot(&bytes)?;
                for t in ds.tables() {
                    seg.created.insert(t.name().to_string());
                    for r in t.records() {
                        seg.push(TombstoneRow {
                            table: t.name().to_string(),
                            key: r.key().to_string(),
                            record: Some(r.clone()),
                            deleted: false,
                        });
                    }
                }
                seg.constraints = Some(ds.constraints().to_vec());
            }
            Placement::DeltaFrom { .. } => {
                let delta = Delta::decode(&bytes)?;
                for (name, td) in &delta.tables {
                    match td.change {
                        TableChange::Created => {
                            seg.created.insert(name.clone());
                        }
                        TableChange::Dropped => {
                            seg.dropped.insert(name.clone());
                        }
                        TableChange::Existing => {}
                    }
                    for (key, op) in &td.ops {
                        let marker = TombstoneRow {
                            table: name.clone(),
                            key: key.clone(),
                            record: None,
                            deleted: true,
                        };
                        match op {
                            RecordOp::Insert { record } => seg.push(TombstoneRow {
                                record: Some(record.clone()),
                                deleted: false,
                                ..marker
                            }),
                            RecordOp::Delete { .. } => seg.push(marker),
                            RecordOp::Update { set, unset, .. } => {
                                let old = visible(&segments, name, key).ok_or_else(|| {
                                    Error::DeltaMismatch(format!("{name}/{key}: update of absent row"))
                                })?;
                                let new = Arc::new(old.with_changes(set, unset)?);
                                seg.push(marker.clone());
                                seg.push(TombstoneRow {
                                    record: Some(new),
                                    deleted: false,
                                    ..marker
                                });
                            }
                        }
                    }
                }
                seg.constraints = delta.constraints.clone();
            }
        }
        segments.push(seg);
    }

    // Tables alive at the end of the chain.
    let mut tables: BTreeSet<String> = BTreeSet::new();
    let mut constraints = Vec::new();
    for seg in &segments {
        tables.extend(seg.created.iter().cloned());
        for d in &seg.dropped {
            tables.remove(d);
        }
        if let Some(c) = &seg.constraints {
            constraints = c.clone();
        }
    }

    // Union of all rows, last mention per key wins, deleted rows filtered.
    let mut last: BTreeMap<(&str, &str), &TombstoneRow> = BTreeMap::new();
    for seg in &segments {
        for row in &seg.rows {
            last.insert((row.table.as_str(), row.key.as_str()), row);
        }
    }
    let mut out = Dataset::new();
    for name in &tables {
        let mut table = Table::new(name.clone())?;
        for ((_, _), row) in last.range((name.as_str(), "")..) {
            if row.table != *name {
                break;
            }
            if !row.deleted {
                table.insert_shared(row.record.clone().expect("live row has a record"))?;
            }
        }
        out.add_table(table)?;
    }
    out.set_constraints(constraints);
    Ok(out)
}
