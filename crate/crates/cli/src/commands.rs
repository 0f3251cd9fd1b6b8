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

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use dsvc_core::hooks::HookEvent;
use dsvc_core::merge::resolutions_from_json;
use dsvc_core::repo::{Config, MergeOptions, MergeOutcome, OutputFormat, Repository, WorkspaceState};
use dsvc_core::{CheckoutMode, Dataset, Provenance, Record, RecordOp, WorkingCopy};

use crate::args::{Cli, Command, DataFormat, Format, HooksCommand, InitArgs, RecordArgs};
use crate::data::{parse_assignment, read_dir, write_dir};
use crate::{CliError, EXIT_CONFLICT, EXIT_CORRUPT, EXIT_OK};

/// Working-copy state kept between invocations.
pub const WORKSPACE_FILE: &str = "workspace.json";

type Out<'a> = &'a mut dyn Write;

fn emit(out: Out<'_>, text: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", text.as_ref()).map_err(|e| CliError::usage(format!("write failed: {e}")))
}

fn open(path: &Path) -> Result<Repository, CliError> {
    Ok(Repository::open(path)?)
}

fn load_wc(repo: &mut Repository) -> Result<WorkingCopy, CliError> {
    let path = repo.root().join(WORKSPACE_FILE);
    match std::fs::read_to_string(&path) {
        Ok(text) => {
            let state: WorkspaceState = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            Ok(repo.restore_working_copy(state)?)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let branch = repo.config().default_branch.clone();
            Ok(repo.checkout(&branch, CheckoutMode::Full)?)
        }
        Err(e) => Err(CliError::usage(format!("{}: {e}", path.display()))),
    }
}

fn save_wc(repo: &Repository, wc: &WorkingCopy) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&wc.state()).expect("workspace serializes");
    let path = repo.root().join(WORKSPACE_FILE);
    std::fs::write(&path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn assignments(args: &[String]) -> Result<BTreeMap<String, dsvc_core::Value>, CliError> {
    args.iter().map(|a| parse_assignment(a)).collect()
}

fn where_am_i(wc: &WorkingCopy) -> String {
    match wc.branch() {
        Some(b) => format!("on branch {b} at v{}", wc.base_version()),
        None => format!("detached at v{}", wc.base_version()),
    }
}

fn init(args: InitArgs, out: Out<'_>) -> Result<i32, CliError> {
    let mut config = Config::default();
    if let Some(b) = args.default_branch {
        config.default_branch = b;
    }
    if let Some(l) = args.max_chain {
        config.max_chain = l;
    }
    if let Some(k) = args.sketch_k {
        config.sketch_k = k;
    }
    if let Some(p) = args.planner {
        config.planner = p;
    }
    if let Some(s) = args.strategy {
        config.merge_strategy = s;
    }
    config.compaction_budget = args.budget;
    Repository::init_with(&args.path, config)?;
    emit(out, "initialized empty repository")?;
    Ok(EXIT_OK)
}

fn record_update(wc: &mut WorkingCopy, a: RecordArgs) -> Result<(), CliError> {
    wc.stage_update(&a.table, &a.key, assignments(&a.set)?, a.unset)?;
    Ok(())
}

pub fn dispatch(cli: Cli, out: Out<'_>) -> Result<i32, CliError> {
    let root = cli.repo;
    match cli.command {
        Command::Init(args) => init(args, out),
        Command::Create(args) => {
            let mut repo = open(&root)?;
            let ds = match (&args.from_csv, &args.from_jsonl) {
                (Some(dir), _) => read_dir(dir, DataFormat::Csv, &args.key)?,
                (None, Some(dir)) => read_dir(dir, DataFormat::Jsonl, &args.key)?,
                (None, None) => return Err(CliError::usage("--from-csv or --from-jsonl is required")),
            };
            let author = repo.config().author.clone();
            let v = repo.create_dataset(&args.name, ds, Provenance::new(args.message, author))?;
            let branch = repo.config().default_branch.clone();
            let wc = repo.checkout(&branch, CheckoutMode::Full)?;
            save_wc(&repo, &wc)?;
            emit(out, format!("created {} at v{v}", args.name))?;
            Ok(EXIT_OK)
        }
        Command::Branch { name, from } => {
            let mut repo = open(&root)?;
            let from = match from {
                Some(f) => f,
                None => format!("v{}", load_wc(&mut repo)?.base_version()),
            };
            let at = repo.branch(&name, &from)?;
            emit(out, format!("branch {name} at v{at}"))?;
            Ok(EXIT_OK)
        }
        Command::Checkout(args) => {
            let mut repo = open(&root)?;
            let mode = match (args.sample, args.seed) {
                (Some(rate), Some(seed)) => CheckoutMode::sampled(rate, seed)?,
                _ => CheckoutMode::Full,
            };
            let wc = repo.checkout(&args.reference, mode)?;
            save_wc(&repo, &wc)?;
            if let Some(dir) = &args.out {
                write_dir(wc.dataset(), dir, args.format, "id")?;
            }
            emit(out, format!("checked out {}", where_am_i(&wc)))?;
            Ok(EXIT_OK)
        }
        Command::Status => {
            let mut repo = open(&root)?;
            let wc = load_wc(&mut repo)?;
            emit(&mut *out, where_am_i(&wc))?;
            match wc.mode() {
                CheckoutMode::Full => emit(&mut *out, "mode: full")?,
                CheckoutMode::Sampled { rate, seed } => {
                    emit(&mut *out, format!("mode: sampled rate={rate} seed={seed}"))?
                }
            }
            let staged = wc.staged();
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for (_, op) in staged.ops() {
                *counts.entry(op.kind()).or_default() += 1;
            }
            let get = |k| counts.get(k).copied().unwrap_or(0);
            emit(
                out,
                format!(
                    "staged: {} inserts, {} updates, {} deletes",
                    get("insert"),
                    get("update"),
                    get("delete")
                ),
            )?;
            Ok(EXIT_OK)
        }
        Command::AddRecord(a) => {
            let mut repo = open(&root)?;
            let mut wc = load_wc(&mut repo)?;
            let record = Record::new(a.key.clone(), assignments(&a.set)?)?;
            wc.stage_insert(&a.table, record)?;
            save_wc(&repo, &wc)?;
            emit(out, format!("staged insert {}/{}", a.table, a.key))?;
            Ok(EXIT_OK)
        }
        Command::DelRecord { table, key } => {
            let mut repo = open(&root)?;
            let mut wc = load_wc(&mut repo)?;
            wc.stage_delete(&table, &key)?;
            save_wc(&repo, &wc)?;
            emit(out, format!("staged delete {table}/{key}"))?;
            Ok(EXIT_OK)
        }
        Command::Set(a) => {
            let mut repo = open(&root)?;
            let mut wc = load_wc(&mut repo)?;
            let what = format!("staged update {}/{}", a.table, a.key);
            record_update(&mut wc, a)?;
            save_wc(&repo, &wc)?;
            emit(out, what)?;
            Ok(EXIT_OK)
        }
        Command::UpdateWhere { table, condition, set } => {
            let mut repo = open(&root)?;
            let mut wc = load_wc(&mut repo)?;
            let pred = dsvc_vql::parse_predicate(&condition)?;
            let n = wc.stage_update_where(&table, pred, assignments(&set)?)?;
            save_wc(&repo, &wc)?;
            emit(out, format!("staged update on {n} records of {table}"))?;
            Ok(EXIT_OK)
        }
        Command::Commit(a) => {
            let mut repo = open(&root)?;
            let mut wc = load_wc(&mut repo)?;
            let mut prov = Provenance::new(a.message, repo.config().author.clone());
            prov.program = a.program;
            prov.code_commit_id = a.code_commit;
            prov.source_datasets = a.derived_from;
            let v = repo.commit(&mut wc, prov)?;
            save_wc(&repo, &wc)?;
            emit(out, format!("committed v{v} on {}", wc.branch().unwrap_or("?")))?;
            Ok(EXIT_OK)
        }
        Command::Rollback => {
            let mut repo = open(&root)?;
            let mut wc = load_wc(&mut repo)?;
            repo.rollback(&mut wc);
            save_wc(&repo, &wc)?;
            emit(out, format!("rolled back to v{}", wc.base_version()))?;
            Ok(EXIT_OK)
        }
        Command::Reset { hard } => {
            let mut repo = open(&root)?;
            let wc = load_wc(&mut repo)?;
            let branch = wc
                .branch()
                .ok_or_else(|| CliError::from(dsvc_core::Error::DetachedHead))?
                .to_string();
            let v = repo.reset_hard(&branch, &hard)?;
            let wc = repo.checkout(&branch, wc.mode())?;
            save_wc(&repo, &wc)?;
            emit(out, format!("{branch} reset to v{v}"))?;
            Ok(EXIT_OK)
        }
        Command::Merge(a) => {
            let mut repo = open(&root)?;
            let wc = load_wc(&mut repo)?;
            let into = wc
                .branch()
                .ok_or_else(|| CliError::from(dsvc_core::Error::DetachedHead))?
                .to_string();
            let resolutions = match &a.resolutions {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                    resolutions_from_json(&text).map_err(|e| CliError::usage(e.to_string()))?
                }
                None => Default::default(),
            };
            let options = MergeOptions {
                strategy: a.strategy,
                resolutions,
                ..Default::default()
            };
            match repo.merge(&into, &a.branch, options)? {
                MergeOutcome::Merged { version, created, resolved, .. } => {
                    if !wc.has_edits() {
                        let wc = repo.checkout(&into, wc.mode())?;
                        save_wc(&repo, &wc)?;
                    }
                    if created {
                        emit(
                            out,
                            format!("merged {} into {into}: v{version} ({resolved} resolved)", a.branch),
                        )?;
                    } else {
                        emit(out, format!("already up to date at v{version}"))?;
                    }
                    Ok(EXIT_OK)
                }
                MergeOutcome::Conflicted { report, .. } => {
                    for c in &report {
                        emit(&mut *out, serde_json::to_string(c).expect("conflict serializes"))?;
                    }
                    Ok(EXIT_CONFLICT)
                }
            }
        }
        Command::Log { reference } => {
            let mut repo = open(&root)?;
            let reference = match reference {
                Some(r) => r,
                None => match load_wc(&mut repo)?.branch() {
                    Some(b) => b.to_string(),
                    None => format!("v{}", load_wc(&mut repo)?.base_version()),
                },
            };
            let json = repo.config().output_format == OutputFormat::Json;
            for node in repo.log(&reference)? {
                if json {
                    emit(&mut *out, serde_json::to_string(&node).expect("node serializes"))?;
                    continue;
                }
                let parents: Vec<String> = node
                    .parents
                    .iter()
                    .map(|(p, k)| format!("v{p}:{}", k.as_str()))
                    .collect();
                let parents = if parents.is_empty() { "-".to_string() } else { parents.join(",") };
                emit(
                    &mut *out,
                    format!("v{}\t{parents}\t{}\t{}", node.id, node.provenance.author, node.provenance.message),
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::Diff { a, b, summary } => {
            let repo = open(&root)?;
            let (va, vb) = (repo.resolve(&a)?, repo.resolve(&b)?);
            let delta = repo.diff(va, vb)?;
            if summary {
                let n = delta.op_count();
                emit(out, format!("{n} record{} differ", if n == 1 { "" } else { "s" }))?;
                return Ok(EXIT_OK);
            }
            for (table, op) in delta.ops() {
                let line = match op {
                    RecordOp::Insert { record } => format!(
                        "+\t{table}\t{}\t{}",
                        record.key(),
                        serde_json::to_string(record.attrs()).expect("attrs serialize")
                    ),
                    RecordOp::Delete { key, .. } => format!("-\t{table}\t{key}"),
                    RecordOp::Update { key, set, unset, .. } => format!(
                        "~\t{table}\t{key}\t{}\t{}",
                        serde_json::to_string(set).expect("attrs serialize"),
                        unset.join(",")
                    ),
                };
                emit(&mut *out, line)?;
            }
            Ok(EXIT_OK)
        }
        Command::Query { vql, format, explain } => {
            let repo = open(&root)?;
            let q = dsvc_vql::parse(&vql)?;
            if explain {
                write!(out, "{}", dsvc_vql::explain(&repo, &q)?).map_err(|e| CliError::usage(e.to_string()))?;
                return Ok(EXIT_OK);
            }
            let rs = dsvc_vql::evaluate(&repo, &q)?;
            let format = format.unwrap_or(match repo.config().output_format {
                OutputFormat::Tsv => Format::Tsv,
                OutputFormat::Json => Format::Json,
            });
            let text = match format {
                Format::Tsv => rs.to_tsv(),
                Format::Json => rs.to_json_lines(),
            };
            write!(out, "{text}").map_err(|e| CliError::usage(e.to_string()))?;
            Ok(EXIT_OK)
        }
        Command::Hooks(HooksCommand::Install { event, path, order }) => {
            let repo = open(&root)?;
            let event: HookEvent = event.parse()?;
            let id = repo.hooks().install(event, &path, order)?;
            emit(out, format!("installed {id}"))?;
            Ok(EXIT_OK)
        }
        Command::Hooks(HooksCommand::List) => {
            let repo = open(&root)?;
            for h in repo.hooks().list(None)? {
                emit(&mut *out, format!("{}\t{}\t{}", h.event, h.order, h.id))?;
            }
            Ok(EXIT_OK)
        }
        Command::Replan { max_chain, planner } => {
            let mut repo = open(&root)?;
            let r = repo.replan(max_chain, planner.as_deref())?;
            emit(
                out,
                format!(
                    "planner {}: {} snapshots, max chain {}, {} -> {} bytes",
                    r.planner,
                    r.plan.snapshots(),
                    r.plan.max_chain,
                    r.bytes_before,
                    r.bytes_after
                ),
            )?;
            Ok(EXIT_OK)
        }
        Command::Compact { budget } => {
            let mut repo = open(&root)?;
            let budget = budget
                .or(repo.config().compaction_budget)
                .ok_or_else(|| CliError::usage("no --budget given and none configured"))?;
            let r = repo.compact(budget)?;
            emit(
                out,
                format!(
                    "converted {} snapshots, {} -> {} bytes",
                    r.conversions.len(),
                    r.bytes_before,
                    r.bytes_after
                ),
            )?;
            Ok(EXIT_OK)
        }
        Command::Export { reference, format, out: dir, key } => {
            let repo = open(&root)?;
            let v = repo.resolve(&reference)?;
            let ds: std::sync::Arc<Dataset> = repo.materialize(v)?;
            write_dir(&ds, &dir, format, &key)?;
            emit(out, format!("exported v{v}"))?;
            Ok(EXIT_OK)
        }
        Command::Verify => {
            let repo = open(&root)?;
            let report = repo.verify()?;
            emit(out, serde_json::to_string(&report).expect("report serializes"))?;
            Ok(if report.is_ok() { EXIT_OK } else { EXIT_CORRUPT })
        }
    }
}
