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

//! Three-way dataset merge.
//!
//! Each side's edits relative to the common base are computed key by key.
//! Keys edited on one side only take that side's state. Keys edited on both
//! sides are handed to a [`ConflictPolicy`], looked up by name in a
//! [`PolicyRegistry`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::delta::RecordOp;
use crate::error::{Error, Result};
use crate::model::{Dataset, ForeignKey, Record, Table};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConflictKind {
    #[serde(rename = "row")]
    RowRow,
    #[serde(rename = "cell")]
    CellCell { attr: String },
    DeleteUpdate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub table: String,
    pub key: String,
    #[serde(flatten)]
    pub kind: ConflictKind,
    pub base: Option<Arc<Record>>,
    pub a: RecordOp,
    pub b: RecordOp,
}

/// Serializes a conflict list in the CLI report format.
pub fn conflicts_to_json(conflicts: &[Conflict]) -> String {
    serde_json::to_string_pretty(conflicts).expect("conflicts serialize")
}

/// How to settle one conflicted key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "take", rename_all = "snake_case")]
pub enum Resolution {
    /// Keep the state of the branch being merged into.
    A,
    /// Keep the state of the branch being merged from.
    B,
    Record { record: Option<Record> },
}

pub type Resolutions = BTreeMap<(String, String), Resolution>;

#[derive(Debug, Serialize, Deserialize)]
struct ResolutionEntry {
    table: String,
    key: String,
    #[serde(flatten)]
    resolution: Resolution,
}

/// Parses `[{"table":t,"key":k,"take":"a"|"b"|"record","record":{..}|null}]`.
pub fn resolutions_from_json(text: &str) -> Result<Resolutions> {
    let entries: Vec<ResolutionEntry> =
        serde_json::from_str(text).map_err(|e| Error::Decode(format!("resolutions: {e}")))?;
    let mut out = Resolutions::new();
    for e in entries {
        if let Resolution::Record { record: Some(r) } = &e.resolution {
            if r.key() != e.key {
                return Err(Error::InvalidRecord(format!(
                    "resolution for {} carries key {}",
                    e.key,
                    r.key()
                )));
            }
        }
        out.insert((e.table, e.key), e.resolution);
    }
    Ok(out)
}

/// Result of combining two edits of the same key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairOutcome {
    /// Merged state; `None` means the key is deleted.
    Clean(Option<Arc<Record>>),
    Conflicts(Vec<ConflictKind>),
}

pub trait ConflictPolicy: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// Combines two different edits of one key made against `base`.
    fn combine(&self, base: Option<&Arc<Record>>, a: &RecordOp, b: &RecordOp) -> PairOutcome;
}

pub struct RowPolicy;

impl ConflictPolicy for RowPolicy {
    fn name(&self) -> &'static str {
        "row"
    }

    fn description(&self) -> &'static str {
        "any key edited differently on both sides conflicts"
    }

    fn combine(&self, base: Option<&Arc<Record>>, a: &RecordOp, b: &RecordOp) -> PairOutcome {
        if a == b {
            return PairOutcome::Clean(apply_op(base, a));
        }
        PairOutcome::Conflicts(vec![ConflictKind::RowRow])
    }
}

pub struct CellPolicy;

impl ConflictPolicy for CellPolicy {
    fn name(&self) -> &'static str {
        "cell"
    }

    fn description(&self) -> &'static str {
        "updates to disjoint attributes of a key compose"
    }

    fn combine(&self, base: Option<&Arc<Record>>, a: &RecordOp, b: &RecordOp) -> PairOutcome {
        if a == b {
            return PairOutcome::Clean(apply_op(base, a));
        }
        match (a, b) {
            (RecordOp::Delete { .. }, RecordOp::Delete { .. }) => PairOutcome::Clean(None),
            (RecordOp::Delete { .. }, _) | (_, RecordOp::Delete { .. }) => {
                PairOutcome::Conflicts(vec![ConflictKind::DeleteUpdate])
            }
            (
                RecordOp::Update {
                    set: set_a,
                    unset: unset_a,
                    ..
                },
                RecordOp::Update {
                    set: set_b,
                    unset: unset_b,
                    ..
                },
            ) => {
                let mut kinds = Vec::new();
                for attr in a.changed_attrs().intersection(&b.changed_attrs()) {
                    if set_a.get(*attr) != set_b.get(*attr) {
                        kinds.push(ConflictKind::CellCell {
                            attr: attr.to_string(),
                        });
                    }
                }
                if !kinds.is_empty() {
                    return PairOutcome::Conflicts(kinds);
                }
                let Some(base) = base else {
                    return PairOutcome::Conflicts(vec![ConflictKind::RowRow]);
                };
                let mut set = set_a.clone();
                set.extend(set_b.iter().map(|(k, v)| (k.clone(), v.clone())));
                let unset: Vec<String> = unset_a
                    .iter()
                    .chain(unset_b.iter())
                    .cloned()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                match base.with_changes(&set, &unset) {
                    Ok(r) => PairOutcome::Clean(Some(Arc::new(r))),
                    Err(_) => PairOutcome::Conflicts(vec![ConflictKind::RowRow]),
                }
            }
            _ => PairOutcome::Conflicts(vec![ConflictKind::RowRow]),
        }
    }
}

fn apply_op(base: Option<&Arc<Record>>, op: &RecordOp) -> Option<Arc<Record>> {
    match op {
        RecordOp::Insert { record } => Some(record.clone()),
        RecordOp::Delete { .. } => None,
        RecordOp::Update { set, unset, .. } => base
            .and_then(|b| b.with_changes(set, unset).ok())
            .map(Arc::new),
    }
}

pub struct PolicyRegistry {
    policies: Vec<Box<dyn ConflictPolicy>>,
}

pub const DEFAULT_POLICY: &str = "cell";

impl PolicyRegistry {
    pub fn empty() -> Self {
        PolicyRegistry {
            policies: Vec::new(),
        }
    }

    pub fn register(&mut self, policy: Box<dyn ConflictPolicy>) {
        self.policies.retain(|p| p.name() != policy.name());
        self.policies.push(policy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ConflictPolicy> {
        self.policies
            .iter()
            .find(|p| p.name() == name)
            .map(|p| p.as_ref())
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.policies.iter().map(|p| p.name())
    }
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut r = PolicyRegistry::empty();
        r.register(Box::new(RowPolicy));
        r.register(Box::new(CellPolicy));
        r
    }
}

/// Output of [`merge_datasets`].
#[derive(Debug, Clone)]
pub struct ThreeWay {
    /// Merged dataset; unresolved keys keep their base state.
    pub dataset: Dataset,
    /// Conflicts not covered by a resolution.
    pub unresolved: Vec<Conflict>,
    /// Every conflict found, resolved or not.
    pub conflicts: Vec<Conflict>,
}

fn merge_flag(base: bool, a: bool, b: bool) -> bool {
    if a == base {
        b
    } else {
        a
    }
}

fn merge_constraints(base: &[ForeignKey], a: &[ForeignKey], b: &[ForeignKey]) -> Vec<ForeignKey> {
    if a == b || b == base {
        a.to_vec()
    } else if a == base {
        b.to_vec()
    } else {
        let mut all: Vec<ForeignKey> = a.iter().chain(b.iter()).cloned().collect();
        all.sort();
        all.dedup();
        all
    }
}

/// Lists conflicting keys between `a` and `b` relative to `base`.
pub fn detect_conflicts(
    base: &Dataset,
    a: &Dataset,
    b: &Dataset,
    policy: &dyn ConflictPolicy,
) -> Vec<Conflict> {
    merge_datasets(base, a, b, policy, &Resolutions::new()).conflicts
}

pub fn merge_datasets(
    base: &Dataset,
    a: &Dataset,
    b: &Dataset,
    policy: &dyn ConflictPolicy,
    resolutions: &Resolutions,
) -> ThreeWay {
    let names: BTreeSet<&String> = base
        .table_names()
        .chain(a.table_names())
        .chain(b.table_names())
        .collect();
    let mut out = Dataset::new();
    let mut conflicts = Vec::new();
    let mut unresolved = Vec::new();
    let empty = Table::new("_").expect("valid name");
    for name in names {
        let tb = base.table(name);
        let ta = a.table(name);
        let tbb = b.table(name);
        let exists = merge_flag(tb.is_some(), ta.is_some(), tbb.is_some());
        let (tb_r, ta_r, tbb_r) = (
            tb.unwrap_or(&empty),
            ta.unwrap_or(&empty),
            tbb.unwrap_or(&empty),
        );
        let keys: BTreeSet<&String> = tb_r.keys().chain(ta_r.keys()).chain(tbb_r.keys()).collect();
        let mut table = Table::new(name.clone()).expect("existing table name");
        for key in keys {
            let rb = tb_r.get(key);
            let ra = ta_r.get(key);
            let rbb = tbb_r.get(key);
            let op_a = RecordOp::between(rb, ra);
            let op_b = RecordOp::between(rb, rbb);
            let merged: Option<Arc<Record>> = match (op_a, op_b) {
                (None, None) => rb.cloned(),
                (Some(_), None) => ra.cloned(),
                (None, Some(_)) => rbb.cloned(),
                (Some(oa), Some(ob)) => {
                    if ra.map(|r| r.state_id()) == rbb.map(|r| r.state_id()) {
                        ra.cloned()
                    } else {
                        match policy.combine(rb, &oa, &ob) {
                            PairOutcome::Clean(r) => r,
                            PairOutcome::Conflicts(kinds) => {
                                let found: Vec<Conflict> = kinds
                                    .into_iter()
                                    .map(|kind| Conflict {
                                        table: name.clone(),
                                        key: key.clone(),
                                        kind,
                                        base: rb.cloned(),
                                        a: oa.clone(),
                                        b: ob.clone(),
                                    })
                                    .collect();
                                conflicts.extend(found.iter().cloned());
                                match resolutions.get(&(name.clone(), key.clone())) {
                                    Some(Resolution::A) => ra.cloned(),
                                    Some(Resolution::B) => rbb.cloned(),
                                    Some(Resolution::Record { record }) => {
                                        record.clone().map(Arc::new)
                                    }
                                    None => {
                                        unresolved.extend(found);
                                        rb.cloned()
                                    }
                                }
                            }
                        }
                    }
                }
            };
            if let Some(r) = merged {
                table.upsert(r);
            }
        }
        if exists || !table.is_empty() {
            out.add_table(table).expect("names are distinct");
        }
    }
    out.set_constraints(merge_constraints(
        base.constraints(),
        a.constraints(),
        b.constraints(),
    ));
    ThreeWay {
        dataset: out,
        unresolved,
        conflicts,
    }
}
