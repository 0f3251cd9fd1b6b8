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

use super::CostGraph;
use crate::delta::compute_delta;
use crate::error::Result;
use crate::graph::VersionGraph;
use crate::model::VersionId;
use crate::sketch::{estimate_diff, Sketch};
use crate::store::VersionStore;

/// Nearest neighbours per version, by estimated difference, added as candidates.
pub const NEAREST_NEIGHBORS: usize = 4;

/// Fixed framing bytes of an encoded delta.
const DELTA_OVERHEAD: u64 = 8 + 1 + 8 + 8 + 4 + 1;

#[derive(Debug, Clone)]
pub struct CostGraphOptions {
    pub neighbors: usize,
    /// Use exact delta sizes when both sketches summarize their whole set.
    pub exact_small: bool,
}

impl Default for CostGraphOptions {
    fn default() -> Self {
        CostGraphOptions {
            neighbors: NEAREST_NEIGHBORS,
            exact_small: true,
        }
    }
}

/// Exact encoded size of the delta turning `u` into `v`.
pub fn exact_delta_bytes(store: &VersionStore, u: VersionId, v: VersionId) -> Result<u64> {
    let base = store.materialize(u)?;
    let target = store.materialize(v)?;
    let mut d = compute_delta(&base, &target);
    d.from = Some(u);
    d.to = Some(v);
    Ok(d.encode(false).len() as u64)
}

pub fn build_cost_graph(
    store: &VersionStore,
    graph: &VersionGraph,
    options: &CostGraphOptions,
) -> Result<CostGraph> {
    let ids: Vec<VersionId> = graph.ids().filter(|v| store.contains(*v)).collect();
    let mut sketches: BTreeMap<VersionId, Sketch> = BTreeMap::new();
    let mut avg_bytes: BTreeMap<VersionId, f64> = BTreeMap::new();
    let mut cg = CostGraph::new();
    for &v in &ids {
        let e = store.entry(v)?;
        cg.add_node(v, e.snapshot_bytes);
        sketches.insert(v, e.sketch()?);
        avg_bytes.insert(v, e.snapshot_bytes as f64 / e.record_count.max(1) as f64);
    }

    let mut pairs: Vec<(VersionId, VersionId)> = Vec::new();
    for node in graph.nodes() {
        for p in node.parent_ids() {
            if sketches.contains_key(&p) && sketches.contains_key(&node.id) {
                pairs.push((p, node.id));
                pairs.push((node.id, p));
            }
        }
    }
    let mut estimates: BTreeMap<(VersionId, VersionId), f64> = BTreeMap::new();
    for &v in &ids {
        let mut near: Vec<(f64, VersionId)> = Vec::new();
        for &u in &ids {
            if u == v {
                continue;
            }
            let (a, b) = (u.min(v), u.max(v));
            let est = match estimates.get(&(a, b)) {
                Some(e) => *e,
                None => {
                    let e = estimate_diff(&sketches[&a], &sketches[&b])?;
                    estimates.insert((a, b), e);
                    e
                }
            };
            near.push((est, u));
        }
        near.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for &(_, u) in near.iter().take(options.neighbors) {
            pairs.push((u, v));
            pairs.push((v, u));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    for (u, v) in pairs {
        let exact = options.exact_small && sketches[&u].is_exact() && sketches[&v].is_exact();
        let weight = if exact {
            exact_delta_bytes(store, u, v)?
        } else {
            let (a, b) = (u.min(v), u.max(v));
            let est = match estimates.get(&(a, b)) {
                Some(e) => *e,
                None => estimate_diff(&sketches[&a], &sketches[&b])?,
            };
            let per_record = (avg_bytes[&u] + avg_bytes[&v]) / 2.0;
            DELTA_OVERHEAD + (est * per_record).round() as u64
        };
        cg.add_edge(u, v, weight);
    }
    Ok(cg)
}
