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

//! Version control for keyed-record datasets.
//!
//! A [`Repository`] holds a DAG of dataset versions. Versions are stored as
//! snapshots or delta chains ([`store::VersionStore`]), can be indexed per
//! record state ([`store::RecordFirstIndex`]), merged three ways ([`merge`])
//! and re-laid-out by pluggable planners ([`planner`]).

pub mod bitmap;
pub mod codec;
pub mod delta;
pub mod error;
pub mod graph;
pub mod hooks;
pub mod merge;
pub mod model;
pub mod planner;
pub mod predicate;
pub mod repo;
pub mod sketch;
pub mod store;

pub use delta::{apply_delta, compute_delta, diff_recs, diff_recs_table, invert_delta, Delta, RecordOp};
pub use error::{Error, Result};
pub use graph::{EdgeKind, Provenance, VersionGraph, VersionNode};
pub use model::{ContentHash, Dataset, ForeignKey, Record, Table, Value, VersionId};
pub use repo::{CheckoutMode, Config, MergeOptions, MergeOutcome, Repository, WorkingCopy};
