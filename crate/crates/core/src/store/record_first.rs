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

//! Record-first representation: each distinct record state is kept once with
//! the bitmap of versions that contain it.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::bitmap::VersionBitmap;
use crate::codec::{self, put_bytes, put_str, put_u32, Reader, RFINDEX_MAGIC};
use crate::delta::{Delta, RecordOp, TableChange};
use crate::error::{Error, Result};
use crate::model::{ContentHash, Dataset, ForeignKey, Record, Table, VersionId};
use crate::predicate::Predicate;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedState {
    pub record: Arc<Record>,
    pub versions: VersionBitmap,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct TableIndex {
    states: BTreeMap<ContentHash, IndexedState>,
    /// Versions in which the table exists, possibly empty.
    exists_in: VersionBitmap,
}

/// Work counters for a scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanStats {
    pub states_examined: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordFirstIndex {
    tables: BTreeMap<String, TableIndex>,
    universe: VersionBitmap,
    constraints: BTreeMap<Vec<ForeignKey>, VersionBitmap>,
}

impl RecordFirstIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn universe(&self) -> &VersionBitmap {
        &self.universe
    }

    pub fn contains_version(&self, v: VersionId) -> bool {
        self.universe.contains(v)
    }

    pub fn state_count(&self) -> usize {
        self.tables.values().map(|t| t.states.len()).sum()
    }

    pub fn state(&self, table: &str, id: &ContentHash) -> Option<&IndexedState> {
        self.tables.get(table)?.states.get(id)
    }

    pub fn states(&self, table: &str) -> impl Iterator<Item = &IndexedState> {
        self.tables.get(table).into_iter().flat_map(|t| t.states.values())
    }

    /// Versions in which `table` exists.
    pub fn versions_with_table(&self, table: &str) -> VersionBitmap {
        self.tables
            .get(table)
            .map(|t| t.exists_in.clone())
            .unwrap_or_default()
    }

    fn add_state(&mut self, table: &str, record: Arc<Record>, v: VersionId) {
        let ti = self.tables.entry(table.to_string()).or_default();
        ti.states
            .entry(record.state_id())
            .or_insert_with(|| IndexedState {
                record,
                versions: VersionBitmap::new(),
            })
            .versions
            .insert(v);
    }

    fn add_constraints(&mut self, list: &[ForeignKey], v: VersionId) {
        self.constraints.entry(list.to_vec()).or_default().insert(v);
    }

    fn constraints_of(&self, v: VersionId) -> Vec<ForeignKey> {
        self.constraints
            .iter()
            .find(|(_, bm)| bm.contains(v))
            .map(|(c, _)| c.clone())
            .unwrap_or_default()
    }

    /// Indexes `v` from its full contents.
    pub fn add_dataset(&mut self, v: VersionId, ds: &Dataset) {
        for t in ds.tables() {
            self.tables
                .entry(t.name().to_string())
                .or_default()
                .exists_in
                .insert(v);
            for r in t.records() {
                self.add_state(t.name(), r.clone(), v);
            }
        }
        self.add_constraints(ds.constraints(), v);
        self.universe.insert(v);
    }

    /// Indexes `v` from an indexed `parent` and the delta `parent -> v`,
    /// without touching the version-first store.
    pub fn add_delta(&mut self, v: VersionId, parent: VersionId, delta: &Delta) -> Result<()> {
        if !self.universe.contains(parent) {
            return Err(Error::UnknownVersion(format!("v{parent} is not indexed")));
        }
        let names: Vec<String> = self.tables.keys().cloned().collect();
        for name in names {
            let td = delta.tables.get(&name);
            let ti = self.tables.get_mut(&name).unwrap();
            if !ti.exists_in.contains(parent) {
                continue;
            }
            if td.is_some_and(|t| t.change == TableChange::Dropped) {
                continue;
            }
            ti.exists_in.insert(v);
            let ops = td.map(|t| &t.ops);
            let mut new_states = Vec::new();
            for state in ti.states.values_mut() {
                if !state.versions.contains(parent) {
                    continue;
                }
                match ops.and_then(|o| o.get(state.record.key())) {
                    None => {
                        state.versions.insert(v);
                    }
                    Some(RecordOp::Update {
                        set,
                        unset,
                        new_state,
                        ..
                    }) => {
                        let updated = state.record.with_changes(set, unset)?;
                        if updated.state_id() != *new_state {
                            return Err(Error::DeltaMismatch(format!(
                                "{name}/{}: updated state differs",
                                state.record.key()
                            )));
                        }
                        new_states.push(Arc::new(updated));
                    }
                    Some(_) => {}
                }
            }
            for r in new_states {
                self.add_state(&name, r, v);
            }
        }
        for (name, td) in &delta.tables {
            if td.change == TableChange::Created {
                self.tables.entry(name.clone()).or_default().exists_in.insert(v);
            }
            for op in td.ops.values() {
                if let RecordOp::Insert { record } = op {
                    self.add_state(name, record.clone(), v);
                }
            }
        }
        let constraints = match &delta.constraints {
            Some(c) => c.clone(),
            None => self.constraints_of(parent),
        };
        self.add_constraints(&constraints, v);
        self.universe.insert(v);
        Ok(())
    }

    /// OR of the bitmaps of every state of `table` satisfying `pred`.
    pub fn versions_matching(&self, table: &str, pred: &Predicate) -> VersionBitmap {
        let mut out = VersionBitmap::new();
        for s in self.states(table) {
            if pred.matches(&s.record) {
                out.or_inplace(&s.versions);
            }
        }
        out
    }

    /// Satisfying states restricted to `versions`, each emitted once.
    pub fn scan_versions(
        &self,
        table: &str,
        pred: &Predicate,
        versions: &VersionBitmap,
    ) -> (Vec<(Arc<Record>, VersionBitmap)>, ScanStats) {
        let mut stats = ScanStats::default();
        let mut out = Vec::new();
        if versions.is_empty() {
            return (out, stats);
        }
        for s in self.states(table) {
            stats.states_examined += 1;
            if !pred.matches(&s.record) {
                continue;
            }
            let vs = s.versions.and(versions);
            if !vs.is_empty() {
                out.push((s.record.clone(), vs));
            }
        }
        (out, stats)
    }

    /// COUNT of satisfying records per version, sharing work across versions.
    pub fn count_per_version(
        &self,
        table: &str,
        pred: &Predicate,
        versions: &VersionBitmap,
    ) -> (BTreeMap<VersionId, u64>, ScanStats) {
        let (rows, stats) = self.scan_versions(table, pred, versions);
        let mut counts: BTreeMap<VersionId, u64> = versions.iter().map(|v| (v, 0)).collect();
        for (_, vs) in rows {
            for v in vs.iter() {
                *counts.entry(v).or_default() += 1;
            }
        }
        (counts, stats)
    }

    /// Rebuilds a version from the index; scans every state.
    pub fn retrieve_version(&self, v: VersionId) -> Result<Dataset> {
        if !self.universe.contains(v) {
            return Err(Error::UnknownVersion(format!("v{v} is not indexed")));
        }
        let mut ds = Dataset::new();
        for (name, ti) in &self.tables {
            if !ti.exists_in.contains(v) {
                continue;
            }
            let mut table = Table::new(name.clone())?;
            for s in ti.states.values() {
                if s.versions.contains(v) {
                    table.insert_shared(s.record.clone()).map_err(|_| {
                        Error::Corrupt(format!(
                            "index holds two states of {name}/{} in v{v}",
                            s.record.key()
                        ))
                    })?;
                }
            }
            ds.add_table(table)?;
        }
        ds.set_constraints(self.constraints_of(v));
        Ok(ds)
    }

    /// Checks that no version holds two states of one key.
    pub fn check_key_uniqueness(&self) -> Result<()> {
        for (name, ti) in &self.tables {
            let mut by_key: BTreeMap<&str, VersionBitmap> = BTreeMap::new();
            for s in ti.states.values() {
                let seen = by_key.entry(s.record.key()).or_default();
                if !seen.and(&s.versions).is_empty() {
                    return Err(Error::Corrupt(format!(
                        "key {name}/{} has two states in one version",
                        s.record.key()
                    )));
                }
                seen.or_inplace(&s.versions);
            }
            let stray = ti.states.values().fold(VersionBitmap::new(), |acc, s| acc.or(&s.versions));
            if !stray.and_not(&ti.exists_in).is_empty() {
                return Err(Error::Corrupt(format!("table {name} has states outside its versions")));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(RFINDEX_MAGIC);
        self.universe.encode_into(&mut out);
        put_u32(&mut out, self.constraints.len());
        for (list, bm) in &self.constraints {
            put_u32(&mut out, list.len());
            for fk in list {
                put_str(&mut out, &fk.from_table);
                put_str(&mut out, &fk.from_attr);
                put_str(&mut out, &fk.to_table);
            }
            bm.encode_into(&mut out);
        }
        put_u32(&mut out, self.tables.len());
        for (name, ti) in &self.tables {
            put_str(&mut out, name);
            ti.exists_in.encode_into(&mut out);
            put_u32(&mut out, ti.states.len());
            for (hash, s) in &ti.states {
                out.extend_from_slice(&hash.0);
                put_bytes(&mut out, &codec::encode_record(&s.record));
                s.versions.encode_into(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < RFINDEX_MAGIC.len() || &bytes[..RFINDEX_MAGIC.len()] != RFINDEX_MAGIC {
            return Err(Error::Decode("bad record-first index magic".into()));
        }
        let mut r = Reader::new(&bytes[RFINDEX_MAGIC.len()..]);
        let mut idx = RecordFirstIndex {
            universe: VersionBitmap::decode(&mut r)?,
            ..Default::default()
        };
        for _ in 0..r.u32()? {
            let mut list = Vec::new();
            for _ in 0..r.u32()? {
                list.push(ForeignKey {
                    from_table: r.str()?,
                    from_attr: r.str()?,
                    to_table: r.str()?,
                });
            }
            idx.constraints.insert(list, VersionBitmap::decode(&mut r)?);
        }
        for _ in 0..r.u32()? {
            let name = r.str()?;
            let mut ti = TableIndex {
                exists_in: VersionBitmap::decode(&mut r)?,
                ..Default::default()
            };
            for _ in 0..r.u32()? {
                let hash = r.hash()?;
                let record = codec::decode_record(&r.bytes()?)?;
                if record.state_id() != hash {
                    return Err(Error::Decode("index state hash mismatch".into()));
                }
                let versions = VersionBitmap::decode(&mut r)?;
                ti.states.insert(
                    hash,
                    IndexedState {
                        record: Arc::new(record),
                        versions,
                    },
                );
            }
            idx.tables.insert(name, ti);
        }
        if !r.is_empty() {
            return Err(Error::Decode("trailing bytes in index".into()));
        }
        Ok(idx)
    }

    /// Versions whose contents were indexed, ascending.
    pub fn indexed_versions(&self) -> BTreeSet<VersionId> {
        self.universe.iter().collect()
    }
}
