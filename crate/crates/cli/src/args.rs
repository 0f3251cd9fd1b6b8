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

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dsvc", version, about = "Version control for keyed-record datasets")]
pub struct Cli {
    /// Repository directory.
    #[arg(short = 'C', long = "repo", global = true, default_value = ".")]
    pub repo: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty repository.
    Init(InitArgs),
    /// Import the repository's dataset as its first version.
    Create(CreateArgs),
    /// Start a branch at a version.
    Branch {
        name: String,
        #[arg(long)]
        from: Option<String>,
    },
    /// Point the working copy at a branch or version.
    Checkout(CheckoutArgs),
    /// Show the working copy's branch, base version and staged edits
    Status,
    /// Stage a new record.
    AddRecord(RecordArgs),
    /// Stage a deletion.
    DelRecord {
        #[arg(long)]
        table: String,
        #[arg(long)]
        key: String,
    },
    /// Stage attribute changes on one record.
    Set(RecordArgs),
    /// Stage attribute changes on every record matching a condition.
    UpdateWhere {
        #[arg(long)]
        table: String,
        #[arg(long = "where")]
        condition: String,
        #[arg(long = "set", value_name = "ATTR=VALUE", required = true)]
        set: Vec<String>,
    },
    /// Record staged edits as a new version
    Commit(CommitArgs),
    /// Discard staged edits.
    Rollback,
    /// Move the current branch back to one of its ancestors.
    Reset {
        #[arg(long)]
        hard: String,
    },
    /// Merge a branch into the current branch.
    Merge(MergeArgs),
    /// List a version and its ancestors
    Log {
        reference: Option<String>,
    },
    /// Compare two versions record by record
    Diff {
        a: String,
        b: String,
        #[arg(long)]
        summary: bool,
    },
    /// Run a VQL query.
    Query {
        vql: String,
        #[arg(long)]
        format: Option<Format>,
        /// Print the plan instead of results.
        #[arg(long)]
        explain: bool,
    },
    #[command(subcommand)]
    /// Install or list event hooks
    Hooks(HooksCommand),
    /// Recompute the storage plan.
    Replan {
        #[arg(long)]
        max_chain: Option<usize>,
        #[arg(long)]
        planner: Option<String>,
    },
    /// Turn snapshots into deltas until storage fits a budget.
    Compact {
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Write a version out as files, one per table.
    Export {
        reference: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: DataFormat,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "id")]
        key: String,
    },
    /// Check every stored version against both representations.
    Verify,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    pub path: PathBuf,
    #[arg(long)]
    pub default_branch: Option<String>,
    /// Longest delta chain allowed
    #[arg(long)]
    pub max_chain: Option<usize>,
    /// Hashes kept per version sketch
    #[arg(long)]
    pub sketch_k: Option<usize>,
    /// Storage planner: arborescence, exhaustive or snapshots
    #[arg(long)]
    pub planner: Option<String>,
    /// Default merge strategy: cell or row
    #[arg(long)]
    pub strategy: Option<String>,
    /// Storage budget in bytes used by compact
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CreateArgs {
    pub name: String,
    #[arg(long, conflicts_with = "from_jsonl", required_unless_present = "from_jsonl")]
    pub from_csv: Option<PathBuf>,
    #[arg(long)]
    pub from_jsonl: Option<PathBuf>,
    /// Column holding the record key.
    #[arg(long, default_value = "id")]
    pub key: String,
    #[arg(short, long, default_value = "initial import")]
    pub message: String,
}

#[derive(Debug, Args)]
pub struct CheckoutArgs {
    pub reference: String,
    #[arg(long, requires = "seed")]
    pub sample: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also export the checked-out data.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: DataFormat,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[arg(long)]
    pub table: String,
    #[arg(long)]
    pub key: String,
    #[arg(long = "set", value_name = "ATTR=VALUE")]
    pub set: Vec<String>,
    #[arg(long = "unset", value_name = "ATTR")]
    pub unset: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CommitArgs {
    #[arg(short, long)]
    pub message: String,
    #[arg(long)]
    pub program: Option<String>,
    #[arg(long)]
    pub code_commit: Option<String>,
    /// Versions this one was derived from.
    #[arg(long = "derived-from")]
    pub derived_from: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    pub branch: String,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub resolutions: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum HooksCommand {
    Install {
        event: String,
        path: PathBuf,
        #[arg(long, default_value_t = 0)]
        order: i64,
    },
    List,
}
