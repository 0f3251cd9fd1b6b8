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

//! Uncommitted edits against one base version.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::delta::{compute_delta, Delta};
use crate::error::{Error, Result};
use crate::model::{Dataset, ForeignKey, Record, Table, Value, VersionId};
use crate::predicate::Predicate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CheckoutMode {
    Full,
    Sampled { rate: f64, seed: u64 },
}

impl CheckoutMode {
    pub fn sampled(rate: f64, seed: u64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidValue(format!(
                "sample rate must be in (0, 1], got {rate}"
            )));
        }
        Ok(CheckoutMode::Sampled { rate, seed })
    }

    /// Whether `key` belongs to the sample; always true in full mode.
    pub fn contains(&self, key: &str) -> bool {
        match *self {
            CheckoutMode::Full => true,
            CheckoutMode::Sampled { rate, seed } => {
                if rate >= 1.0 {
                    return true;
                }
                sample_hash(seed, key) < (rate * 2f64.powi(64)) as u64
            }
        }
    }
}

/// 64-bit hash deciding sample membership.
pub fn sample_hash(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update(key.as_bytes());
    u64::from_be_bytes(h.finalize()[..8].try_into().unwrap())
}

/// One recorded edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    Insert {
        table: String,
        record: Record,
    },
    Delete {
        table: String,
        key: String,
    },
    Update {
        table: String,
        key: String,
        set: BTreeMap<String, Value>,
        #[serde(default)]
        unset: Vec<String>,
    },
    UpdateWhere {
        table: String,
        predicate: Predicate,
        set: BTreeMap<String, Value>,
    },
    CreateTable {
        table: String,
    },
    DropTable {
        table: String,
    },
    SetConstraints {
        constraints: Vec<ForeignKey>,
    },
}

fn table_mut<'a>(ds: &'a mut Dataset, name: &str) -> Result<&'a mut Table> {
    ds.table_mut(name)
        .ok_or_else(|| Error::UnknownTable(name.to_string()))
}

fn row_check(mode: &CheckoutMode, key: &str) -> Result<()> {
    if mode.contains(key) {
        Ok(())
    } else {
        Err(Error::SampledRowUpdateForbidden {
            key: key.to_string(),
        })
    }
}

/// Applies `edit` to `ds`, leaving it untouched on error. Row edits are
/// checked against `mode`'s sample. Returns the number of records changed.
pub(crate) fn apply_edit(ds: &mut Dataset, edit: &Edit, mode: &CheckoutMode) -> Result<usize> {
    match edit {
        Edit::Insert { table, record } => {
            row_check(mode, record.key())?;
            table_mut(ds, table)?.insert(record.clone())?;
            Ok(1)
        }
        Edit::Delete { table, key } => {
            row_check(mode, key)?;
            let t = table_mut(ds, table)?;
            t.remove(key).ok_or_else(|| Error::UnknownKey {
                table: table.clone(),
                key: key.clone(),
            })?;
            Ok(1)
        }
        Edit::Update {
            table,
            key,
            set,
            unset,
        } => {
            row_check(mode, key)?;
            let t = table_mut(ds, table)?;
            let old = t.get(key).ok_or_else(|| Error::UnknownKey {
                table: table.clone(),
                key: key.clone(),
            })?;
            let new = old.with_changes(set, unset)?;
            t.upsert(Arc::new(new));
            Ok(1)
        }
        Edit::UpdateWhere {
            table,
            predicate,
            set,
        } => {
            let t = table_mut(ds, table)?;
            let mut changed = Vec::new();
            for r in t.records() {
                if predicate.matches(r) {
                    let new = r.with_changes(set, &[])?;
                    if new != **r {
                        changed.push(Arc::new(new));
                    }
                }
            }
            let n = changed.len();
            for r in changed {
                t.upsert(r);
            }
            Ok(n)
        }
        Edit::CreateTable { table } => {
            ds.add_table(Table::new(table.clone())?)?;
            Ok(0)
        }
        Edit::DropTable { table } => {
            let t = ds
                .remove_table(table)
                .ok_or_else(|| Error::UnknownTable(table.clone()))?;
            Ok(t.len())
        }
        Edit::SetConstraints { constraints } => {
            ds.set_constraints(constraints.clone());
            Ok(0)
        }
    }
}

fn sample_view(ds: &Dataset, mode: &CheckoutMode) -> Dataset {
    let mut out = Dataset::new();
    for t in ds.tables() {
        let mut view = Table::new(t.name()).expect("existing table name");
        for r in t.records() {
            if mode.contains(r.key()) {
                view.upsert(r.clone());
            }
        }
        out.add_table(view).expect("distinct names");
    }
    out.set_constraints(ds.constraints().to_vec());
    out
}

/// Persistable part of a working copy; the datasets are rebuilt from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceState {
    pub base_version: VersionId,
    pub branch: Option<String>,
    pub mode: CheckoutMode,
    pub journal: Vec<Edit>,
}

/// A checked-out version plus uncommitted edits.
///
/// In sampled mode the visible dataset holds only sampled keys; row edits
/// must target sampled keys, and the edit journal is replayed on the full
/// base at commit, so predicate updates also reach unsampled rows.
#[derive(Debug, Clone)]
pub struct WorkingCopy {
    base_version: VersionId,
    branch: Option<String>,
    mode: CheckoutMode,
    base: Arc<Dataset>,
    base_view: Arc<Dataset>,
    current: Dataset,
    journal: Vec<Edit>,
}

impl WorkingCopy {
    pub fn new(
        base_version: VersionId,
        branch: Option<String>,
        mode: CheckoutMode,
        base: Arc<Dataset>,
    ) -> Self {
        let base_view = match mode {
            CheckoutMode::Full => base.clone(),
            CheckoutMode::Sampled { .. } => Arc::new(sample_view(&base, &mode)),
        };
        WorkingCopy {
            base_version,
            branch,
            mode,
            current: (*base_view).clone(),
            base,
            base_view,
            journal: Vec::new(),
        }
    }

    pub fn base_version(&self) -> VersionId {
        self.base_version
    }

    pub fn branch(&self) -> Option<&str> {
        self.branch.as_deref()
    }

    pub fn mode(&self) -> CheckoutMode {
        self.mode
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.mode, CheckoutMode::Sampled { .. })
    }

    pub fn in_sample(&self, key: &str) -> bool {
        self.mode.contains(key)
    }

    /// The visible dataset with edits applied.
    pub fn dataset(&self) -> &Dataset {
        &self.current
    }

    /// The full base version.
    pub fn base(&self) -> &Arc<Dataset> {
        &self.base
    }

    pub fn journal(&self) -> &[Edit] {
        &self.journal
    }

    pub fn has_edits(&self) -> bool {
        !self.journal.is_empty()
    }

    /// Net staged changes over the visible dataset, one op per key.
    pub fn staged(&self) -> Delta {
        compute_delta(&self.base_view, &self.current)
    }

    pub fn apply(&mut self, edit: Edit) -> Result<usize> {
        let n = apply_edit(&mut self.current, &edit, &self.mode)?;
        self.journal.push(edit);
        Ok(n)
    }

    pub fn stage_insert(&mut self, table: &str, record: Record) -> Result<()> {
        self.apply(Edit::Insert {
            table: table.into(),
            record,
        })
        .map(|_| ())
    }

    pub fn stage_delete(&mut self, table: &str, key: &str) -> Result<()> {
        self.apply(Edit::Delete {
            table: table.into(),
            key: key.into(),
        })
        .map(|_| ())
    }

    pub fn stage_update(
        &mut self,
        table: &str,
        key: &str,
        set: BTreeMap<String, Value>,
        unset: Vec<String>,
    ) -> Result<()> {
        self.apply(Edit::Update {
            table: table.into(),
            key: key.into(),
            set,
            unset,
        })
        .map(|_| ())
    }

    /// Sets attributes on every matching row; returns the visible rows changed.
    pub fn stage_update_where(
        &mut self,
        table: &str,
        predicate: Predicate,
        set: BTreeMap<String, Value>,
    ) -> Result<usize> {
        self.apply(Edit::UpdateWhere {
            table: table.into(),
            predicate,
            set,
        })
    }

    pub fn create_table(&mut self, table: &str) -> Result<()> {
        self.apply(Edit::CreateTable {
            table: table.into(),
        })
        .map(|_| ())
    }

    pub fn drop_table(&mut self, table: &str) -> Result<()> {
        self.apply(Edit::DropTable {
            table: table.into(),
        })
        .map(|_| ())
    }

    pub fn set_constraints(&mut self, constraints: Vec<ForeignKey>) -> Result<()> {
        self.apply(Edit::SetConstraints { constraints }).map(|_| ())
    }

    /// Discards uncommitted edits.
    pub fn rollback(&mut self) {
        self.current = (*self.base_view).clone();
        self.journal.clear();
    }

    /// The full dataset this working copy would commit.
    pub(crate) fn result(&self) -> Result<Dataset> {
        match self.mode {
            CheckoutMode::Full => Ok(self.current.clone()),
            CheckoutMode::Sampled { .. } => {
                let mut full = (*self.base).clone();
                for edit in &self.journal {
                    apply_edit(&mut full, edit, &CheckoutMode::Full)?;
                }
                Ok(full)
            }
        }
    }

    pub(crate) fn rebase(&mut self, version: VersionId, base: Arc<Dataset>) {
        *self = WorkingCopy::new(version, self.branch.clone(), self.mode, base);
    }

    pub fn state(&self) -> WorkspaceState {
        WorkspaceState {
            base_version: self.base_version,
            branch: self.branch.clone(),
            mode: self.mode,
            journal: self.journal.clone(),
        }
    }

    /// Rebuilds a working copy from saved state over its base dataset.
    pub(crate) fn restore(state: WorkspaceState, base: Arc<Dataset>) -> Result<Self> {
        let mut wc = WorkingCopy::new(state.base_version, state.branch, state.mode, base);
        for edit in state.journal {
            wc.apply(edit)?;
        }
        Ok(wc)
    }
}
