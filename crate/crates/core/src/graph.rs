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

//! The version graph: a DAG of committed versions plus branch refs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ContentHash, VersionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Successor,
    Branch,
    Merge,
    Derivation,
}

impl EdgeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeKind::Successor => "successor",
            EdgeKind::Branch => "branch",
            EdgeKind::Merge => "merge",
            EdgeKind::Derivation => "derivation",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub message: String,
    pub author: String,
    /// UTC seconds.
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_commit_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source_datasets: Vec<VersionId>,
}

impl Provenance {
    pub fn new(message: impl Into<String>, author: impl Into<String>) -> Self {
        Provenance {
            message: message.into(),
            author: author.into(),
            timestamp: now_secs(),
            ..Default::default()
        }
    }
}

pub fn now_secs() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionNode {
    pub id: VersionId,
    pub parents: Vec<(VersionId, EdgeKind)>,
    pub provenance: Provenance,
    pub dataset_hash: ContentHash,
}

impl VersionNode {
    pub fn parent_ids(&self) -> impl Iterator<Item = VersionId> + '_ {
        self.parents.iter().map(|(p, _)| *p)
    }

    pub fn is_merge(&self) -> bool {
        self.parents.iter().any(|(_, k)| *k == EdgeKind::Merge)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    nodes: Vec<VersionNode>,
    refs: BTreeMap<String, Option<VersionId>>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pending_branches: BTreeSet<String>,
}

/// Versions and refs of one repository.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionGraph {
    dataset: Option<String>,
    nodes: BTreeMap<VersionId, VersionNode>,
    refs: BTreeMap<String, Option<VersionId>>,
    /// Branches created but not yet committed to.
    pending: BTreeSet<String>,
}

impl VersionGraph {
    pub fn new(default_branch: &str) -> Self {
        VersionGraph {
            dataset: None,
            nodes: BTreeMap::new(),
            refs: [(default_branch.to_string(), None)].into(),
            pending: BTreeSet::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            dataset: self.dataset.clone(),
            nodes: self.nodes.values().cloned().collect(),
            refs: self.refs.clone(),
            pending_branches: self.pending.clone(),
        };
        serde_json::to_string_pretty(&file).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let file: GraphFile = serde_json::from_str(text)?;
        Ok(VersionGraph {
            dataset: file.dataset,
            nodes: file.nodes.into_iter().map(|n| (n.id, n)).collect(),
            refs: file.refs,
            pending: file.pending_branches,
        })
    }

    /// Structural checks: parents exist, ids increase along edges, refs resolve.
    pub fn validate(&self) -> Result<()> {
        for node in self.nodes.values() {
            let mut seen = BTreeSet::new();
            for (p, _) in &node.parents {
                if !self.nodes.contains_key(p) {
                    return Err(Error::Corrupt(format!("v{} has unknown parent v{p}", node.id)));
                }
                if *p >= node.id {
                    return Err(Error::Corrupt(format!(
                        "v{} has parent v{p} with a larger id (cycle)",
                        node.id
                    )));
                }
                if !seen.insert(*p) {
                    return Err(Error::Corrupt(format!("v{} repeats parent v{p}", node.id)));
                }
            }
            let merges = node.parents.iter().filter(|(_, k)| *k == EdgeKind::Merge).count();
            if merges == 1 {
                return Err(Error::Corrupt(format!("merge v{} has a single parent", node.id)));
            }
        }
        for (name, head) in &self.refs {
            if let Some(h) = head {
                if !self.nodes.contains_key(h) {
                    return Err(Error::Corrupt(format!("ref {name} points at missing v{h}")));
                }
            }
        }
        Ok(())
    }

    pub fn dataset_name(&self) -> Option<&str> {
        self.dataset.as_deref()
    }

    pub fn set_dataset_name(&mut self, name: &str) {
        self.dataset = Some(name.to_string());
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn next_id(&self) -> VersionId {
        self.nodes.keys().next_back().map_or(1, |m| m + 1)
    }

    pub fn node(&self, v: VersionId) -> Result<&VersionNode> {
        self.nodes
            .get(&v)
            .ok_or_else(|| Error::UnknownVersion(format!("v{v}")))
    }

    pub fn contains(&self, v: VersionId) -> bool {
        self.nodes.contains_key(&v)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &VersionNode> {
        self.nodes.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = VersionId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn refs(&self) -> &BTreeMap<String, Option<VersionId>> {
        &self.refs
    }

    pub fn head(&self, branch: &str) -> Result<Option<VersionId>> {
        self.refs
            .get(branch)
            .copied()
            .ok_or_else(|| Error::UnknownBranch(branch.to_string()))
    }

    pub fn is_pending(&self, branch: &str) -> bool {
        self.pending.contains(branch)
    }

    pub(crate) fn add_branch(&mut self, name: &str, at: VersionId) -> Result<()> {
        if self.refs.contains_key(name) {
            return Err(Error::BranchExists(name.to_string()));
        }
        self.node(at)?;
        self.refs.insert(name.to_string(), Some(at));
        self.pending.insert(name.to_string());
        Ok(())
    }

    pub(crate) fn set_head(&mut self, branch: &str, v: VersionId) {
        self.refs.insert(branch.to_string(), Some(v));
        self.pending.remove(branch);
    }

    /// Moves a branch head without changing whether it has been committed to.
    pub(crate) fn move_head(&mut self, branch: &str, v: VersionId) {
        self.refs.insert(branch.to_string(), Some(v));
    }

    /// Appends a node; parents must exist and have smaller ids.
    pub(crate) fn push(&mut self, node: VersionNode) -> Result<()> {
        if self.nodes.contains_key(&node.id) {
            return Err(Error::Corrupt(format!("v{} already exists", node.id)));
        }
        for p in node.parent_ids() {
            self.node(p)?;
            if p >= node.id {
                return Err(Error::Corrupt(format!("v{} would precede parent v{p}", node.id)));
            }
        }
        self.nodes.insert(node.id, node);
        Ok(())
    }

    /// Resolves a branch name, `v<N>` or `<N>`.
    pub fn resolve(&self, reference: &str) -> Result<VersionId> {
        if let Some(head) = self.refs.get(reference) {
            return head.ok_or_else(|| {
                Error::UnknownVersion(format!("branch {reference} has no versions"))
            });
        }
        let digits = reference.strip_prefix('v').unwrap_or(reference);
        match digits.parse::<VersionId>() {
            Ok(v) if self.nodes.contains_key(&v) => Ok(v),
            _ => Err(Error::UnknownVersion(reference.to_string())),
        }
    }

    pub fn children(&self) -> BTreeMap<VersionId, Vec<VersionId>> {
        let mut out: BTreeMap<VersionId, Vec<VersionId>> =
            self.nodes.keys().map(|&k| (k, Vec::new())).collect();
        for node in self.nodes.values() {
            for p in node.parent_ids() {
                out.entry(p).or_default().push(node.id);
            }
        }
        out
    }

    /// `v` and everything it descends from.
    pub fn ancestors(&self, v: VersionId) -> Result<BTreeSet<VersionId>> {
        self.node(v)?;
        let mut seen = BTreeSet::from([v]);
        let mut stack = vec![v];
        while let Some(cur) = stack.pop() {
            for p in self.nodes[&cur].parent_ids() {
                if seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        Ok(seen)
    }

    /// Shortest directed path length from `from` to `to`, or -1 if `to` is
    /// not a descendant of `from`.
    pub fn distance(&self, from: VersionId, to: VersionId) -> Result<i64> {
        self.node(from)?;
        self.node(to)?;
        if from == to {
            return Ok(0);
        }
        let children = self.children();
        let mut dist = BTreeMap::from([(from, 0i64)]);
        let mut queue = VecDeque::from([from]);
        while let Some(cur) = queue.pop_front() {
            let d = dist[&cur];
            for &c in &children[&cur] {
                if c > to {
                    continue;
                }
                if !dist.contains_key(&c) {
                    if c == to {
                        return Ok(d + 1);
                    }
                    dist.insert(c, d + 1);
                    queue.push_back(c);
                }
            }
        }
        Ok(-1)
    }

    /// Longest path length from a root.
    pub fn depth(&self, v: VersionId) -> Result<usize> {
        let anc = self.ancestors(v)?;
        let mut depth: BTreeMap<VersionId, usize> = BTreeMap::new();
        for id in anc {
            let d = self.nodes[&id]
                .parent_ids()
                .map(|p| depth[&p] + 1)
                .max()
                .unwrap_or(0);
            depth.insert(id, d);
        }
        Ok(depth[&v])
    }

    /// Merge base: among the lowest common ancestors, the deepest, ties to
    /// the largest id.
    pub fn lca(&self, a: VersionId, b: VersionId) -> Result<VersionId> {
        let aa = self.ancestors(a)?;
        let bb = self.ancestors(b)?;
        let common: BTreeSet<VersionId> = aa.intersection(&bb).copied().collect();
        if common.is_empty() {
            return Err(Error::NoCommonAncestor(a, b));
        }
        // Drop every common ancestor that is a strict ancestor of another one.
        let mut dominated = BTreeSet::new();
        for &c in &common {
            for p in self.ancestors(c)? {
                if p != c {
                    dominated.insert(p);
                }
            }
        }
        let mut best: Option<(usize, VersionId)> = None;
        for &c in common.difference(&dominated) {
            let key = (self.depth(c)?, c);
            if best.is_none_or(|b| key > b) {
                best = Some(key);
            }
        }
        Ok(best.expect("non-empty").1)
    }

    /// Ancestors of `v`, newest first; every node's parents come after it.
    pub fn log(&self, v: VersionId) -> Result<Vec<&VersionNode>> {
        let anc = self.ancestors(v)?;
        Ok(anc.iter().rev().map(|id| &self.nodes[id]).collect())
    }

    pub fn is_ancestor(&self, ancestor: VersionId, of: VersionId) -> Result<bool> {
        Ok(self.ancestors(of)?.contains(&ancestor))
    }
}
