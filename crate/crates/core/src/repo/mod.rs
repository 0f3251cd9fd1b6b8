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

//! The on-disk repository: version graph, refs, storage and the lifecycle
//! operations over them.

mod config;
mod maintenance;
mod workspace;

pub use config::{Config, OutputFormat, CONFIG_FILE, DEFAULT_MAX_CHAIN};
pub use maintenance::{CompactionReport, ReplanReport, VerifyReport};
pub use workspace::{sample_hash, CheckoutMode, Edit, WorkingCopy, WorkspaceState};

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::delta::{compute_delta, Delta};
use crate::error::{Error, Result};
use crate::graph::{EdgeKind, Provenance, VersionGraph, VersionNode};
use crate::hooks::{HookContext, HookEvent, Hooks};
use crate::merge::{merge_datasets, Conflict, PolicyRegistry, Resolutions};
use crate::model::{Dataset, VersionId};
use crate::planner::{PlannerRegistry, StoragePlan};
use crate::store::{write_atomic, Placement, RecordFirstIndex, VersionStore};

pub const GRAPH_FILE: &str = "graph.json";
pub const REFS_DIR: &str = "refs";
pub const PLAN_FILE: &str = "plan.json";
pub const INDEX_FILE: &str = "rfindex.bin";
pub const LOCK_FILE: &str = "LOCK";

#[derive(Debug, Clone)]
pub enum MergeOutcome {
    /// `created` is false when the source was already merged and nothing was written.
    Merged {
        version: VersionId,
        dataset: Arc<Dataset>,
        resolved: usize,
        created: bool,
    },
    Conflicted {
        report: Vec<Conflict>,
        partial: Dataset,
    },
}

impl MergeOutcome {
    pub fn version(&self) -> Option<VersionId> {
        match self {
            MergeOutcome::Merged { version, .. } => Some(*version),
            MergeOutcome::Conflicted { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MergeOptions {
    /// Conflict policy name; the configured default when `None`.
    pub strategy: Option<String>,
    pub resolutions: Resolutions,
    /// Fail with `UnresolvedConflicts` instead of reporting.
    pub require_clean: bool,
    pub provenance: Option<Provenance>,
}

pub struct Repository {
    root: PathBuf,
    config: Config,
    graph: VersionGraph,
    store: VersionStore,
    plan_bound: Option<usize>,
    index: Mutex<Option<Arc<RecordFirstIndex>>>,
    lock: Option<File>,
    planners: PlannerRegistry,
    policies: PolicyRegistry,
    hooks: Hooks,
}

fn read_graph(root: &Path) -> Result<VersionGraph> {
    let path = root.join(GRAPH_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let graph = VersionGraph::from_json(&text).map_err(|e| Error::json(&path, e))?;
    graph.validate()?;
    Ok(graph)
}

fn read_plan(root: &Path) -> Result<Option<StoragePlan>> {
    let path = root.join(PLAN_FILE);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::json(&path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(&path, e)),
    }
}

fn validate_branch_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        && !name.starts_with(['.', '-'])
        && name.strip_prefix('v').unwrap_or(name).parse::<u64>().is_err();
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidValue(format!("invalid branch name {name:?}")))
    }
}

impl Repository {
    /// Creates an empty repository at `path` with default settings.
    pub fn init(path: impl AsRef<Path>) -> Result<Repository> {
        Repository::init_with(path, Config::default())
    }

    pub fn init_with(path: impl AsRef<Path>, config: Config) -> Result<Repository> {
        let root = path.as_ref().to_path_buf();
        if root.exists() {
            let mut entries = fs::read_dir(&root).map_err(|e| Error::io(&root, e))?;
            if entries.next().is_some() {
                return Err(Error::AlreadyExists(root));
            }
        }
        validate_branch_name(&config.default_branch)?;
        PlannerRegistry::default().get(&config.planner)?;
        PolicyRegistry::default().get(&config.merge_strategy)?;
        for dir in ["objects", REFS_DIR] {
            let d = root.join(dir);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        let lock = root.join(LOCK_FILE);
        File::create(&lock).map_err(|e| Error::io(&lock, e))?;
        config.save(&root)?;
        let graph = VersionGraph::new(&config.default_branch);
        let store = VersionStore::open(&root, config.compress)?;
        store.save_manifest()?;
        let repo = Repository::assemble(root, config, graph, store, None);
        repo.save_graph()?;
        Ok(repo)
    }

    /// Opens an existing repository for reading; writes take the lock as needed.
    pub fn open(path: impl AsRef<Path>) -> Result<Repository> {
        let root = path.as_ref().to_path_buf();
        if !root.join(GRAPH_FILE).is_file() {
            return Err(Error::NotARepository(root));
        }
        let config = Config::load(&root)?;
        let graph = read_graph(&root)?;
        let mut store = VersionStore::open(&root, config.compress)?;
        store.set_sketch_k(config.sketch_k);
        if let Some(v) = graph.ids().find(|v| !store.contains(*v)) {
            return Err(Error::Corrupt(format!("v{v} has no stored data")));
        }
        let plan = read_plan(&root)?;
        Ok(Repository::assemble(
            root,
            config,
            graph,
            store,
            plan.map(|p| p.max_chain),
        ))
    }

    fn assemble(
        root: PathBuf,
        config: Config,
        graph: VersionGraph,
        mut store: VersionStore,
        plan_bound: Option<usize>,
    ) -> Repository {
        store.set_sketch_k(config.sketch_k);
        Repository {
            hooks: Hooks::new(&root),
            root,
            config,
            graph,
            store,
            plan_bound,
            index: Mutex::new(None),
            lock: None,
            planners: PlannerRegistry::default(),
            policies: PolicyRegistry::default(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn set_config(&mut self, config: Config) -> Result<()> {
        self.lock_for_write()?;
        validate_branch_name(&config.default_branch)?;
        self.planners.get(&config.planner)?;
        self.policies.get(&config.merge_strategy)?;
        config.save(&self.root)?;
        self.store.set_compress(config.compress);
        self.store.set_sketch_k(config.sketch_k);
        self.config = config;
        Ok(())
    }

    pub fn graph(&self) -> &VersionGraph {
        &self.graph
    }

    pub fn store(&self) -> &VersionStore {
        &self.store
    }

    pub fn hooks(&self) -> &Hooks {
        &self.hooks
    }

    pub fn planners(&self) -> &PlannerRegistry {
        &self.planners
    }

    pub fn planners_mut(&mut self) -> &mut PlannerRegistry {
        &mut self.planners
    }

    pub fn policies(&self) -> &PolicyRegistry {
        &self.policies
    }

    pub fn policies_mut(&mut self) -> &mut PolicyRegistry {
        &mut self.policies
    }

    pub fn dataset_name(&self) -> Option<&str> {
        self.graph.dataset_name()
    }

    /// Chain bound applied to new commits.
    pub fn max_chain(&self) -> usize {
        self.plan_bound.unwrap_or(self.config.max_chain)
    }

    /// Takes the writer lock (blocking) and reloads on-disk state.
    fn lock_for_write(&mut self) -> Result<()> {
        if self.lock.is_some() {
            return Ok(());
        }
        let path = self.root.join(LOCK_FILE);
        let file = fs::OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        file.lock().map_err(|e| Error::io(&path, e))?;
        self.lock = Some(file);
        self.graph = read_graph(&self.root)?;
        self.store.reload_manifest()?;
        self.plan_bound = read_plan(&self.root)?.map(|p| p.max_chain);
        Ok(())
    }

    fn unlock(&mut self) {
        self.lock = None;
    }

    fn save_graph(&self) -> Result<()> {
        write_atomic(&self.root.join(GRAPH_FILE), self.graph.to_json().as_bytes())?;
        let refs = self.root.join(REFS_DIR);
        for (name, head) in self.graph.refs() {
            let text = head.map(|v| format!("{v}\n")).unwrap_or_default();
            write_atomic(&refs.join(name), text.as_bytes())?;
        }
        Ok(())
    }

    fn save_plan(&self) -> Result<()> {
        let plan = self.plan();
        let text = serde_json::to_string_pretty(&plan).expect("plan serializes");
        write_atomic(&self.root.join(PLAN_FILE), text.as_bytes())
    }

    /// Current placements with the bound used for new commits.
    pub fn plan(&self) -> StoragePlan {
        StoragePlan {
            max_chain: self.max_chain(),
            placements: self
                .store
                .placements()
                .into_iter()
                .filter(|(v, _)| self.graph.contains(*v))
                .collect(),
        }
    }

    pub fn resolve(&self, reference: &str) -> Result<VersionId> {
        self.graph.resolve(reference)
    }

    pub fn materialize(&self, v: VersionId) -> Result<Arc<Dataset>> {
        self.graph.node(v)?;
        self.store.materialize(v)
    }

    /// Materializes a reference and records the access.
    pub fn export(&mut self, reference: &str) -> Result<(VersionId, Arc<Dataset>)> {
        let v = self.resolve(reference)?;
        let ds = self.materialize(v)?;
        self.touch(v)?;
        Ok((v, ds))
    }

    fn touch(&mut self, v: VersionId) -> Result<()> {
        let held = self.lock.is_some();
        self.lock_for_write()?;
        self.store.touch(v);
        let saved = self.store.save_manifest();
        if !held {
            self.unlock();
        }
        saved
    }

    pub fn log(&self, reference: &str) -> Result<Vec<VersionNode>> {
        let v = self.resolve(reference)?;
        Ok(self.graph.log(v)?.into_iter().cloned().collect())
    }

    pub fn distance(&self, from: VersionId, to: VersionId) -> Result<i64> {
        self.graph.distance(from, to)
    }

    pub fn lca(&self, a: VersionId, b: VersionId) -> Result<VersionId> {
        self.graph.lca(a, b)
    }

    pub fn diff(&self, a: VersionId, b: VersionId) -> Result<Delta> {
        let mut d = compute_delta(&*self.materialize(a)?, &*self.materialize(b)?);
        d.from = Some(a);
        d.to = Some(b);
        Ok(d)
    }

    fn hook_context(
        &self,
        version: Option<VersionId>,
        parents: Vec<VersionId>,
        branch: Option<&str>,
        changed: Vec<String>,
    ) -> HookContext {
        HookContext {
            repo: self.root.clone(),
            dataset: self.dataset_name().unwrap_or_default().to_string(),
            version,
            parents,
            branch: branch.map(str::to_string),
            changed_tables: changed,
        }
    }

    fn placement_after(&self, parent: Option<VersionId>) -> Result<Placement> {
        Ok(match parent {
            Some(p) if self.store.chain_depth(p)? < self.max_chain() => {
                Placement::DeltaFrom { from: p }
            }
            _ => Placement::Materialize,
        })
    }

    /// Runs pre-commit hooks, stores `ds` as a new version on `branch`,
    /// releases the lock and runs `post` hooks.
    fn write_version(
        &mut self,
        branch: &str,
        parents: Vec<(VersionId, EdgeKind)>,
        ds: Dataset,
        base: Option<(VersionId, &Dataset)>,
        mut provenance: Provenance,
        post: HookEvent,
    ) -> Result<VersionId> {
        let changed = match base {
            Some((_, b)) => compute_delta(b, &ds).changed_tables(),
            None => ds.table_names().cloned().collect(),
        };
        let parent_ids: Vec<VersionId> = parents.iter().map(|(p, _)| *p).collect();
        let ctx = self.hook_context(None, parent_ids.clone(), Some(branch), changed.clone());
        self.hooks.fire(HookEvent::PreCommit, &ctx)?;

        let id = self.graph.next_id();
        for p in &parent_ids {
            provenance.timestamp = provenance
                .timestamp
                .max(self.graph.node(*p)?.provenance.timestamp);
        }
        let placement = self.placement_after(base.map(|(v, _)| v))?;
        let dataset_hash = ds.content_hash();
        self.store
            .put_version(id, &ds, placement, base.map(|(_, b)| b))?;
        self.store.save_manifest()?;
        self.graph.push(VersionNode {
            id,
            parents,
            provenance,
            dataset_hash,
        })?;
        self.graph.set_head(branch, id);
        self.save_graph()?;
        self.save_plan()?;
        self.unlock();

        let ctx = self.hook_context(Some(id), parent_ids, Some(branch), changed);
        self.hooks.fire(HookEvent::PostCommit, &ctx)?;
        if post != HookEvent::PostCommit {
            self.hooks.fire(post, &ctx)?;
        }
        Ok(id)
    }

    /// Commits the root version of the repository's dataset on the default branch.
    pub fn create_dataset(
        &mut self,
        name: &str,
        ds: Dataset,
        provenance: Provenance,
    ) -> Result<VersionId> {
        self.lock_for_write()?;
        let branch = self.config.default_branch.clone();
        if self.graph.dataset_name().is_some() || self.graph.head(&branch)?.is_some() {
            return Err(Error::Duplicate(name.to_string()));
        }
        if name.is_empty() {
            return Err(Error::InvalidValue("empty dataset name".into()));
        }
        ds.check_constraint_names()?;
        self.graph.set_dataset_name(name);
        let result = self.write_version(
            &branch,
            Vec::new(),
            ds,
            None,
            provenance,
            HookEvent::PostCommit,
        );
        if result.is_err() && self.graph.is_empty() {
            self.graph = read_graph(&self.root)?;
            self.unlock();
        }
        result
    }

    /// Creates a branch ref at `from`; no version is created until the first commit.
    pub fn branch(&mut self, name: &str, from: &str) -> Result<VersionId> {
        self.lock_for_write()?;
        validate_branch_name(name)?;
        let at = self.resolve(from)?;
        self.graph.add_branch(name, at)?;
        self.save_graph()?;
        Ok(at)
    }

    /// Checks out a branch (attached) or a version (detached).
    pub fn checkout(&mut self, target: &str, mode: CheckoutMode) -> Result<WorkingCopy> {
        let v = self.resolve(target)?;
        let branch = self
            .graph
            .refs()
            .contains_key(target)
            .then(|| target.to_string());
        let base = self.materialize(v)?;
        self.touch(v)?;
        Ok(WorkingCopy::new(v, branch, mode, base))
    }

    /// Rebuilds a saved working copy.
    pub fn restore_working_copy(&self, state: WorkspaceState) -> Result<WorkingCopy> {
        let base = self.materialize(state.base_version)?;
        WorkingCopy::restore(state, base)
    }

    pub fn rollback(&self, wc: &mut WorkingCopy) {
        wc.rollback();
    }

    pub fn commit(&mut self, wc: &mut WorkingCopy, provenance: Provenance) -> Result<VersionId> {
        let branch = wc.branch().ok_or(Error::DetachedHead)?.to_string();
        self.lock_for_write()?;
        let result = self.commit_locked(wc, &branch, provenance);
        if result.is_err() {
            self.unlock();
        }
        result
    }

    fn commit_locked(
        &mut self,
        wc: &mut WorkingCopy,
        branch: &str,
        provenance: Provenance,
    ) -> Result<VersionId> {
        let head = self.graph.head(branch)?;
        if head != Some(wc.base_version()) {
            return Err(Error::StaleBase {
                base: wc.base_version(),
                head: head.map_or_else(|| "empty".into(), |h| format!("v{h}")),
            });
        }
        let base_v = wc.base_version();
        let ds = wc.result()?;
        if ds == **wc.base() {
            return Err(Error::EmptyCommit);
        }
        ds.check_constraint_names()?;
        let kind = if self.graph.is_pending(branch) {
            EdgeKind::Branch
        } else {
            EdgeKind::Successor
        };
        let mut parents = vec![(base_v, kind)];
        for &src in &provenance.source_datasets {
            self.graph.node(src)?;
            if !parents.iter().any(|(p, _)| *p == src) {
                parents.push((src, EdgeKind::Derivation));
            }
        }
        let base = wc.base().clone();
        let id = self.write_version(
            branch,
            parents,
            ds,
            Some((base_v, &base)),
            provenance,
            HookEvent::PostCommit,
        )?;
        let new_base = self.store.materialize(id)?;
        wc.rebase(id, new_base);
        Ok(id)
    }

    /// Moves `branch` back to an ancestor of its head. No version is removed.
    pub fn reset_hard(&mut self, branch: &str, target: &str) -> Result<VersionId> {
        self.lock_for_write()?;
        let head = self
            .graph
            .head(branch)?
            .ok_or_else(|| Error::UnknownVersion(format!("branch {branch} has no versions")))?;
        let t = self.resolve(target)?;
        if !self.graph.is_ancestor(t, head)? {
            return Err(Error::ResetRefused(format!(
                "v{t} is not an ancestor of {branch} (v{head})"
            )));
        }
        self.graph.move_head(branch, t);
        self.save_graph()?;
        Ok(t)
    }

    /// Three-way merge of `from` into branch `into`.
    pub fn merge(&mut self, into: &str, from: &str, options: MergeOptions) -> Result<MergeOutcome> {
        self.lock_for_write()?;
        let result = self.merge_locked(into, from, options);
        self.unlock();
        result
    }

    fn merge_locked(&mut self, into: &str, from: &str, options: MergeOptions) -> Result<MergeOutcome> {
        let a = self
            .graph
            .head(into)?
            .ok_or_else(|| Error::UnknownVersion(format!("branch {into} has no versions")))?;
        let b = self.resolve(from)?;
        let base = self.graph.lca(a, b)?;
        if base == b {
            return Ok(MergeOutcome::Merged {
                version: a,
                dataset: self.materialize(a)?,
                resolved: 0,
                created: false,
            });
        }
        let strategy = options
            .strategy
            .clone()
            .unwrap_or_else(|| self.config.merge_strategy.clone());
        let policy = self.policies.get(&strategy)?;
        let (dbase, da, db) = (
            self.materialize(base)?,
            self.materialize(a)?,
            self.materialize(b)?,
        );
        let merged = merge_datasets(&dbase, &da, &db, policy, &options.resolutions);
        if !merged.unresolved.is_empty() {
            if options.require_clean {
                return Err(Error::UnresolvedConflicts(merged.unresolved.len()));
            }
            return Ok(MergeOutcome::Conflicted {
                report: merged.unresolved,
                partial: merged.dataset,
            });
        }
        merged.dataset.check_constraint_names()?;
        let provenance = options.provenance.clone().unwrap_or_else(|| {
            Provenance::new(
                format!("merge {from} (v{b}) into {into} (v{a})"),
                self.config.author.clone(),
            )
        });
        let resolved = merged.conflicts.len();
        let id = self.write_version(
            into,
            vec![(a, EdgeKind::Merge), (b, EdgeKind::Merge)],
            merged.dataset,
            Some((a, &da)),
            provenance,
            HookEvent::PostMerge,
        )?;
        Ok(MergeOutcome::Merged {
            version: id,
            dataset: self.store.materialize(id)?,
            resolved,
            created: true,
        })
    }

    /// Merges several sources into `into` one after another. Nothing is
    /// written unless every step merges cleanly.
    pub fn merge_many(
        &mut self,
        into: &str,
        sources: &[&str],
        options: MergeOptions,
    ) -> Result<MergeOutcome> {
        if sources.len() < 2 {
            return Err(Error::InvalidValue("merge_many needs at least two sources".into()));
        }
        self.lock_for_write()?;
        let dry = self.dry_run_many(into, sources, &options);
        self.unlock();
        if let Some(conflicted) = dry? {
            return Ok(conflicted);
        }
        let mut last = None;
        for s in sources {
            match self.merge(into, s, options.clone())? {
                m @ MergeOutcome::Merged { .. } => last = Some(m),
                MergeOutcome::Conflicted { .. } => {
                    return Err(Error::Corrupt("merge result changed after dry run".into()))
                }
            }
        }
        Ok(last.expect("at least two sources"))
    }

    fn dry_run_many(
        &self,
        into: &str,
        sources: &[&str],
        options: &MergeOptions,
    ) -> Result<Option<MergeOutcome>> {
        let mut graph = self.graph.clone();
        let mut virtual_ds: BTreeMap<VersionId, Arc<Dataset>> = BTreeMap::new();
        let load = |v: VersionId, virt: &BTreeMap<VersionId, Arc<Dataset>>| -> Result<Arc<Dataset>> {
            match virt.get(&v) {
                Some(d) => Ok(d.clone()),
                None => self.materialize(v),
            }
        };
        let mut head = graph
            .head(into)?
            .ok_or_else(|| Error::UnknownVersion(format!("branch {into} has no versions")))?;
        let strategy = options
            .strategy
            .clone()
            .unwrap_or_else(|| self.config.merge_strategy.clone());
        let policy = self.policies.get(&strategy)?;
        for s in sources {
            let b = self.resolve(s)?;
            let base = graph.lca(head, b)?;
            if base == b {
                continue;
            }
            let merged = merge_datasets(
                &*load(base, &virtual_ds)?,
                &*load(head, &virtual_ds)?,
                &*load(b, &virtual_ds)?,
                policy,
                &options.resolutions,
            );
            if !merged.unresolved.is_empty() {
                if options.require_clean {
                    return Err(Error::UnresolvedConflicts(merged.unresolved.len()));
                }
                return Ok(Some(MergeOutcome::Conflicted {
                    report: merged.unresolved,
                    partial: merged.dataset,
                }));
            }
            let id = graph.next_id();
            graph.push(VersionNode {
                id,
                parents: vec![(head, EdgeKind::Merge), (b, EdgeKind::Merge)],
                provenance: Provenance::default(),
                dataset_hash: merged.dataset.content_hash(),
            })?;
            virtual_ds.insert(id, Arc::new(merged.dataset));
            head = id;
        }
        Ok(None)
    }

    /// Record-first index covering every version, caught up incrementally.
    pub fn record_index(&self) -> Result<Arc<RecordFirstIndex>> {
        let mut slot = self.index.lock().unwrap();
        let mut index = match slot.take() {
            Some(ix) => ix,
            None => Arc::new(self.load_index()),
        };
        let missing: Vec<VersionId> = self
            .graph
            .ids()
            .filter(|v| !index.contains_version(*v))
            .collect();
        if !missing.is_empty() {
            let ix = Arc::make_mut(&mut index);
            for v in missing {
                let node = self.graph.node(v)?;
                let ds = self.materialize(v)?;
                match node.parent_ids().find(|p| ix.contains_version(*p)) {
                    Some(p) => {
                        let delta = compute_delta(&*self.materialize(p)?, &ds);
                        ix.add_delta(v, p, &delta)?;
                    }
                    None => ix.add_dataset(v, &ds),
                }
            }
            if let Err(e) = write_atomic(&self.root.join(INDEX_FILE), &index.to_bytes()) {
                log::warn!("could not persist record index: {e}");
            }
        }
        *slot = Some(index.clone());
        Ok(index)
    }

    fn load_index(&self) -> RecordFirstIndex {
        let path = self.root.join(INDEX_FILE);
        let Ok(bytes) = fs::read(&path) else {
            return RecordFirstIndex::new();
        };
        match RecordFirstIndex::from_bytes(&bytes) {
            Ok(ix) if ix.indexed_versions().iter().all(|v| self.graph.contains(*v)) => ix,
            Ok(_) => {
                log::warn!("{} indexes unknown versions; rebuilding", path.display());
                RecordFirstIndex::new()
            }
            Err(e) => {
                log::warn!("{} is unreadable ({e}); rebuilding", path.display());
                RecordFirstIndex::new()
            }
        }
    }
}
