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

//! Re-planning, compaction and self-checks.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::Repository;
use crate::codec;
use crate::error::{Error, Result};
use crate::hooks::HookEvent;
use crate::model::{content_hash, ContentHash, VersionId};
use crate::planner::{build_cost_graph, exact_delta_bytes, CostGraphOptions, StoragePlan, ROOT};
use crate::store::{tombstone_read, Placement, RecordFirstIndex};

#[derive(Debug, Clone, Serialize)]
pub struct ReplanReport {
    pub planner: String,
    pub plan: StoragePlan,
    /// Planned cost over the refined cost graph.
    pub planned_bytes: u64,
    pub bytes_before: u64,
    pub bytes_after: u64,
    pub reclaimed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CompactionReport {
    /// Versions turned into deltas, with their new base.
    pub conversions: Vec<(VersionId, VersionId)>,
    pub bytes_before: u64,
    pub bytes_after: u64,
    pub reclaimed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub versions: usize,
    pub problems: Vec<String>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Refinement rounds replacing estimated weights of selected edges with exact sizes.
const REFINE_ROUNDS: usize = 4;

fn chain_depths(placements: &BTreeMap<VersionId, Placement>) -> BTreeMap<VersionId, usize> {
    let mut out = BTreeMap::new();
    for &v in placements.keys() {
        let mut d = 0;
        let mut cur = v;
        while let Some(Placement::DeltaFrom { from }) = placements.get(&cur) {
            d += 1;
            cur = *from;
            if d > placements.len() {
                break;
            }
        }
        out.insert(v, d);
    }
    out
}

fn subtree(placements: &BTreeMap<VersionId, Placement>, root: VersionId) -> BTreeSet<VersionId> {
    let mut out = BTreeSet::from([root]);
    let mut grew = true;
    while grew {
        grew = false;
        for (&v, p) in placements {
            if let Placement::DeltaFrom { from } = p {
                if out.contains(from) && out.insert(v) {
                    grew = true;
                }
            }
        }
    }
    out
}

fn unique_total(sizes: &BTreeMap<VersionId, (ContentHash, u64)>) -> u64 {
    let unique: BTreeMap<ContentHash, u64> = sizes.values().copied().collect();
    unique.values().sum()
}

impl Repository {
    fn apply_placements(&mut self, target: &BTreeMap<VersionId, Placement>) -> Result<u64> {
        let mut payloads = Vec::new();
        for (&v, &p) in target {
            if self.store.entry(v)?.placement() != p {
                payloads.push((v, p, self.store.encoded_payload(v, p)?));
            }
        }
        for (v, p, bytes) in payloads {
            self.store.replace_placement(v, p, &bytes)?;
        }
        for &v in target.keys() {
            self.store.resolve_chain(v)?;
        }
        self.store.save_manifest()?;
        self.save_plan()?;
        self.store.collect_garbage()
    }

    /// Recomputes placements for every version with the named strategy.
    pub fn replan(&mut self, max_chain: Option<usize>, planner: Option<&str>) -> Result<ReplanReport> {
        self.lock_for_write()?;
        let result = self.replan_locked(max_chain, planner);
        self.unlock();
        result
    }

    fn replan_locked(&mut self, max_chain: Option<usize>, planner: Option<&str>) -> Result<ReplanReport> {
        let bound = max_chain.unwrap_or(self.max_chain());
        let name = planner.unwrap_or(&self.config.planner).to_string();
        let strategy = self.planners.get(&name)?;
        let bytes_before = self.store.stored_bytes()?;
        let mut cg = build_cost_graph(&self.store, &self.graph, &CostGraphOptions::default())?;
        let mut refined: BTreeSet<(VersionId, VersionId)> = BTreeSet::new();
        let mut plan = strategy.plan(&cg, bound)?;
        for _ in 0..REFINE_ROUNDS {
            let mut changed = false;
            for (&v, p) in &plan.placements {
                if let Placement::DeltaFrom { from } = *p {
                    if refined.insert((from, v)) {
                        let exact = exact_delta_bytes(&self.store, from, v)?;
                        if cg.weight(from, v) != Some(exact) {
                            cg.add_edge(from, v, exact);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
            plan = strategy.plan(&cg, bound)?;
        }
        plan.validate(&cg)?;
        let planned_bytes = plan.total_cost(&cg);
        let reclaimed = self.apply_placements(&plan.placements)?;
        self.plan_bound = Some(bound);
        self.save_plan()?;
        Ok(ReplanReport {
            planner: name,
            plan: self.plan(),
            planned_bytes,
            bytes_before,
            bytes_after: self.store.stored_bytes()?,
            reclaimed,
        })
    }

    /// Turns least-recently-accessed snapshots into deltas until the store
    /// fits in `budget` bytes. Nothing changes when the budget is unreachable.
    pub fn compact(&mut self, budget: u64) -> Result<CompactionReport> {
        self.lock_for_write()?;
        let result = self.compact_locked(budget);
        self.unlock();
        let report = result?;
        if !report.conversions.is_empty() {
            let ctx = self.hook_context(None, Vec::new(), None, Vec::new());
            self.hooks.fire(HookEvent::PostCompact, &ctx)?;
        }
        Ok(report)
    }

    fn compact_locked(&mut self, budget: u64) -> Result<CompactionReport> {
        let largest = self
            .store
            .manifest()
            .versions
            .values()
            .map(|e| e.snapshot_bytes)
            .max()
            .unwrap_or(0);
        if budget <= largest {
            return Err(Error::BudgetInfeasible {
                budget,
                reason: format!("the largest snapshot alone takes {largest} bytes"),
            });
        }
        let mut sizes: BTreeMap<VersionId, (ContentHash, u64)> = BTreeMap::new();
        for (&v, e) in &self.store.manifest().versions {
            sizes.insert(v, (e.object, self.store.objects().size_of(&e.object)?));
        }
        let bytes_before = unique_total(&sizes);
        if bytes_before <= budget {
            return Ok(CompactionReport {
                bytes_before,
                bytes_after: bytes_before,
                ..Default::default()
            });
        }
        let bound = self.max_chain();
        let heads: BTreeSet<VersionId> = self.graph.refs().values().flatten().copied().collect();
        let mut placements = self.store.placements();
        let mut candidates: Vec<(u64, VersionId)> = self
            .store
            .manifest()
            .versions
            .iter()
            .filter(|(v, e)| e.placement() == Placement::Materialize && !heads.contains(v))
            .map(|(v, e)| (e.last_access, *v))
            .collect();
        candidates.sort();
        let cg = build_cost_graph(&self.store, &self.graph, &CostGraphOptions::default())?;
        let mut conversions = Vec::new();
        let mut total = bytes_before;
        for (_, v) in candidates {
            if total <= budget {
                break;
            }
            let depths = chain_depths(&placements);
            let sub = subtree(&placements, v);
            let height = sub.iter().map(|x| depths[x]).max().unwrap_or(0);
            let mut options: Vec<(u64, VersionId)> = cg
                .candidates(v)
                .into_iter()
                .filter(|(u, _)| *u != ROOT && !sub.contains(u))
                .filter(|(u, _)| depths[u] + 1 + height <= bound)
                .map(|(u, w)| (w, u))
                .collect();
            options.sort();
            let Some(&(_, u)) = options.first() else {
                continue;
            };
            let placement = Placement::DeltaFrom { from: u };
            let payload = self.store.encoded_payload(v, placement)?;
            if payload.len() as u64 >= sizes[&v].1 {
                continue;
            }
            placements.insert(v, placement);
            sizes.insert(v, (content_hash(&payload), payload.len() as u64));
            total = unique_total(&sizes);
            conversions.push((v, u));
        }
        if total > budget {
            return Err(Error::BudgetInfeasible {
                budget,
                reason: format!("compaction can reach {total} bytes at best"),
            });
        }
        let reclaimed = self.apply_placements(&placements)?;
        Ok(CompactionReport {
            conversions,
            bytes_before,
            bytes_after: self.store.stored_bytes()?,
            reclaimed,
        })
    }

    /// Cross-checks every version against independent reads: stored hash,
    /// tombstone-union read, snapshot codec round trip and both record
    /// indexes (persisted and rebuilt).
    pub fn verify(&self) -> Result<VerifyReport> {
        let mut report = VerifyReport::default();
        if let Err(e) = self.graph.validate() {
            report.problems.push(e.to_string());
        }
        for (name, head) in self.graph.refs() {
            let path = self.root.join(super::REFS_DIR).join(name);
            let text = std::fs::read_to_string(&path).unwrap_or_default();
            let expected = head.map(|v| v.to_string()).unwrap_or_default();
            if text.trim() != expected {
                report
                    .problems
                    .push(format!("refs/{name} holds {:?}, graph says {expected:?}", text.trim()));
            }
        }
        let persisted = match self.record_index() {
            Ok(ix) => Some(ix),
            Err(e) => {
                report.problems.push(format!("record index: {e}"));
                None
            }
        };
        let mut fresh = RecordFirstIndex::new();
        for node in self.graph.nodes() {
            let v = node.id;
            report.versions += 1;
            let ds = match self.store.materialize(v) {
                Ok(ds) => ds,
                Err(e) => {
                    report.problems.push(format!("v{v}: {e}"));
                    continue;
                }
            };
            fresh.add_dataset(v, &ds);
            if ds.content_hash() != node.dataset_hash {
                report.problems.push(format!("v{v}: content hash differs from graph"));
            }
            match tombstone_read(&self.store, v) {
                Ok(t) if t == *ds => {}
                Ok(_) => report.problems.push(format!("v{v}: tombstone read differs")),
                Err(e) => report.problems.push(format!("v{v}: tombstone read failed: {e}")),
            }
            match codec::decode_snapshot(&codec::encode_snapshot(&ds, false)) {
                Ok(back) if back == *ds => {}
                _ => report.problems.push(format!("v{v}: snapshot round trip differs")),
            }
            for (label, ix) in [("persisted", persisted.as_deref()), ("rebuilt", Some(&fresh))] {
                let Some(ix) = ix else { continue };
                match ix.retrieve_version(v) {
                    Ok(r) if r == *ds => {}
                    Ok(_) => report
                        .problems
                        .push(format!("v{v}: {label} record index differs")),
                    Err(e) => report.problems.push(format!("v{v}: {label} record index: {e}")),
                }
            }
        }
        if let Err(e) = fresh.check_key_uniqueness() {
            report.problems.push(format!("record index: {e}"));
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depths_and_subtrees() {
        let p: BTreeMap<VersionId, Placement> = [
            (1, Placement::Materialize),
            (2, Placement::DeltaFrom { from: 1 }),
            (3, Placement::DeltaFrom { from: 2 }),
            (4, Placement::Materialize),
        ]
        .into();
        let d = chain_depths(&p);
        assert_eq!(d[&3], 2);
        assert_eq!(d[&4], 0);
        assert_eq!(subtree(&p, 2), BTreeSet::from([2, 3]));
    }
}
