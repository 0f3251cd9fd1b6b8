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

use std::path::PathBuf;

use crate::model::VersionId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("malformed encoding: {0}")]
    Decode(String),

    #[error("repository already exists at {0}")]
    AlreadyExists(PathBuf),
    #[error("not a repository: {0}")]
    NotARepository(PathBuf),
    #[error("dataset already created: {0}")]
    Duplicate(String),
    #[error("unknown version: {0}")]
    UnknownVersion(String),
    #[error("unknown branch: {0}")]
    UnknownBranch(String),
    #[error("branch already exists: {0}")]
    BranchExists(String),
    #[error("unknown table: {0}")]
    UnknownTable(String),
    #[error("record {key} already present in table {table}")]
    DuplicateInsert { table: String, key: String },
    #[error("no record {key} in table {table}")]
    UnknownKey { table: String, key: String },
    #[error("row-level edit of key {key} outside the sampled checkout; use a predicate update")]
    SampledRowUpdateForbidden { key: String },
    #[error("working copy is based on v{base} but branch head is {head}")]
    StaleBase { base: VersionId, head: String },
    #[error("working copy is detached from any branch")]
    DetachedHead,
    #[error("nothing to commit")]
    EmptyCommit,
    #[error("hook {hook} rejected the commit (exit code {exit_code:?}): {stderr}")]
    HookRejected {
        hook: String,
        exit_code: Option<i32>,
        stderr: String,
    },
    #[error("constraint references unknown table {0}")]
    ConstraintNameUnknown(String),
    #[error("reset refused: {0}")]
    ResetRefused(String),

    #[error("delta does not apply: {0}")]
    DeltaMismatch(String),
    #[error("sketches built with different k ({0} vs {1})")]
    SketchMismatch(usize, usize),

    #[error("base version v{0} is not stored")]
    UnknownBaseVersion(VersionId),
    #[error("broken storage chain at v{0}")]
    BrokenChain(VersionId),
    #[error("object {0} is corrupt")]
    CorruptObject(String),

    #[error("planner {0} is not registered")]
    UnknownPlanner(String),
    #[error("cost graph is infeasible: v{0} is unreachable")]
    InfeasibleGraph(VersionId),
    #[error("exhaustive planning is limited to {limit} versions, got {size}")]
    TooLarge { size: usize, limit: usize },
    #[error("storage budget of {budget} bytes cannot be met: {reason}")]
    BudgetInfeasible { budget: u64, reason: String },

    #[error("versions v{0} and v{1} share no common ancestor")]
    NoCommonAncestor(VersionId, VersionId),
    #[error("merge strategy {0} is not registered")]
    UnknownStrategy(String),
    #[error("{0} unresolved merge conflicts")]
    UnresolvedConflicts(usize),
    #[error("sampled working copies cannot merge")]
    SampledMerge,

    #[error("hook executable {0} is missing or not executable")]
    NotExecutable(PathBuf),
    #[error("unknown hook event: {0}")]
    UnknownHookEvent(String),

    #[error("corrupt repository: {0}")]
    Corrupt(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for failures that indicate damaged on-disk state rather than bad input.
    pub fn is_corruption(&self) -> bool {
        matches!(
            self,
            Error::Decode(_)
                | Error::BrokenChain(_)
                | Error::CorruptObject(_)
                | Error::Corrupt(_)
                | Error::DeltaMismatch(_)
                | Error::Io { .. }
                | Error::Json { .. }
        )
    }
}
