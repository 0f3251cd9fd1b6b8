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

//! Minimum spanning arborescence from the virtual root (Chu-Liu/Edmonds),
//! followed by chain-depth repair and local re-parenting.

use std::collections::{BTreeMap, BTreeSet};

use super::{CostGraph, PlacementStrategy, StoragePlan, ROOT};
use crate::error::{Error, Result};
use crate::model::VersionId;

pub struct ArborescencePlanner;

const SEARCH_LIMIT: usize = 40;
const SEARCH_ROUNDS: usize = 8;
const PAIR_LIMIT: usize = 12;

impl PlacementStrategy for ArborescencePlanner {
    fn name(&self) -> &'static str {
        "arborescence"
    }

    fn description(&self) -> &'static str {
        "minimum spanning arborescence with depth repair (heuristic)"
    }

    fn plan(&self, graph: &CostGraph, max_chain: usize) -> Result<StoragePlan> {
        graph.check_feasible()?;
        let tree = min_arborescence(graph)?;
        // A plan feasible for a smaller bound is feasible for this one, so
        // keeping the best over all smaller bounds makes cost monotone in L.
        let limit = max_chain.min(graph.len().saturating_sub(1)).max(1);
        let mut best: Option<(u64, BTreeMap<VersionId, VersionId>)> = None;
        for bound in 1..=limit {
            let mut parents = tree.clone();
            repair_depth(graph, &mut parents, bound);
            improve(graph, &mut parents, bound);
            if graph.len() <= SEARCH_LIMIT {
                for _ in 0..SEARCH_ROUNDS {
                    if !search(graph, &mut parents, bound) {
                        break;
                    }
                }
            }
            let cost = cost_of(graph, &parents);
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, parents));
            }
        }
        let parents = match (max_chain, best) {
            (0, _) | (_, None) => graph.nodes().map(|v| (v, ROOT)).collect(),
            (_, Some((_, p))) => p,
        };
        Ok(StoragePlan::from_parents(max_chain, &parents))
    }
}

fn cost_of(graph: &CostGraph, parents: &BTreeMap<VersionId, VersionId>) -> u64 {
    parents
        .iter()
        .map(|(&v, &u)| graph.weight(u, v).expect("planned edge exists"))
        .sum()
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    from: usize,
    to: usize,
    weight: u64,
    /// Original (from, to) version pair, used to break ties.
    key: (VersionId, VersionId),
    /// Index into the caller's edge list.
    id: usize,
}

/// Chosen incoming edge (index into `edges`) for every non-root node.
fn edmonds(n: usize, root: usize, edges: &[Edge]) -> Option<Vec<Option<usize>>> {
    let mut best: Vec<Option<usize>> = vec![None; n];
    for (i, e) in edges.iter().enumerate() {
        if e.to == root || e.from == e.to {
            continue;
        }
        let better = match best[e.to] {
            None => true,
            Some(j) => (e.weight, e.key) < (edges[j].weight, edges[j].key),
        };
        if better {
            best[e.to] = Some(i);
        }
    }
    if (0..n).any(|v| v != root && best[v].is_none()) {
        return None;
    }

    let mut comp = vec![usize::MAX; n];
    let mut in_cycle = vec![false; n];
    let mut visited = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        let mut x = start;
        while x != root && visited[x] == usize::MAX {
            visited[x] = start;
            x = edges[best[x].unwrap()].from;
        }
        if x != root && visited[x] == start && comp[x] == usize::MAX {
            let mut y = x;
            loop {
                comp[y] = next;
                in_cycle[y] = true;
                y = edges[best[y].unwrap()].from;
                if y == x {
                    break;
                }
            }
            next += 1;
        }
    }
    if next == 0 {
        return Some(best);
    }
    for c in comp.iter_mut() {
        if *c == usize::MAX {
            *c = next;
            next += 1;
        }
    }

    let mut sub = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        let (cu, cv) = (comp[e.from], comp[e.to]);
        if cu == cv {
            continue;
        }
        let weight = if in_cycle[e.to] {
            e.weight - edges[best[e.to].unwrap()].weight
        } else {
            e.weight
        };
        sub.push(Edge {
            from: cu,
            to: cv,
            weight,
            key: e.key,
            id: i,
        });
    }
    let chosen = edmonds(next, comp[root], &sub)?;
    let mut result: Vec<Option<usize>> = vec![None; n];
    for ci in chosen.into_iter().flatten() {
        let i = sub[ci].id;
        result[edges[i].to] = Some(i);
    }
    for v in 0..n {
        if v != root && result[v].is_none() {
            result[v] = best[v];
        }
    }
    Some(result)
}

/// Parent (or `ROOT`) of every version in a minimum-weight arborescence.
pub(crate) fn min_arborescence(graph: &CostGraph) -> Result<BTreeMap<VersionId, VersionId>> {
    let ids: Vec<VersionId> = std::iter::once(ROOT).chain(graph.nodes()).collect();
    let index: BTreeMap<VersionId, usize> = ids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut edges = Vec::new();
    for (&v, &w) in &graph.snapshot {
        edges.push((ROOT, v, w));
    }
    for (&(u, v), &w) in &graph.edges {
        edges.push((u, v, w));
    }
    let list: Vec<Edge> = edges
        .iter()
        .enumerate()
        .map(|(i, &(u, v, w))| Edge {
            from: index[&u],
            to: index[&v],
            weight: w,
            key: (u, v),
            id: i,
        })
        .collect();
    let chosen = edmonds(ids.len(), 0, &list).ok_or_else(|| {
        let missing = graph
            .nodes()
            .find(|v| graph.candidates(*v).is_empty())
            .unwrap_or(ROOT);
        Error::InfeasibleGraph(missing)
    })?;
    let mut parents = BTreeMap::new();
    for (node, edge) in chosen.iter().enumerate().skip(1) {
        let (u, v, _) = edges[edge.expect("every node has a parent")];
        debug_assert_eq!(v, ids[node]);
        parents.insert(v, u);
    }
    Ok(parents)
}

fn depths(parents: &BTreeMap<VersionId, VersionId>) -> BTreeMap<VersionId, usize> {
    let mut depth: BTreeMap<VersionId, usize> = BTreeMap::new();
    for &v in parents.keys() {
        let mut path = vec![v];
        let mut cur = v;
        let base = loop {
            let p = parents[&cur];
            if p == ROOT {
                break 0;
            }
            if let Some(&d) = depth.get(&p) {
                break d + 1;
            }
            path.push(p);
            cur = p;
        };
        // path holds v .. cur, where cur's depth is `base`
        for (i, node) in path.iter().rev().enumerate() {
            depth.insert(*node, base + i);
        }
    }
    depth
}

fn subtree(parents: &BTreeMap<VersionId, VersionId>, root: VersionId) -> BTreeSet<VersionId> {
    let mut children: BTreeMap<VersionId, Vec<VersionId>> = BTreeMap::new();
    for (&v, &u) in parents {
        children.entry(u).or_default().push(v);
    }
    let mut out = BTreeSet::from([root]);
    let mut stack = vec![root];
    while let Some(x) = stack.pop() {
        for &c in children.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
            if out.insert(c) {
                stack.push(c);
            }
        }
    }
    out
}

/// Shortens chains until every version is at most `bound` deltas from a
/// snapshot. Each step picks the cheapest change that brings the shallowest
/// violator within bound: materializing it or one of its ancestors, or
/// re-attaching one of them to a strictly shallower base.
fn repair_depth(graph: &CostGraph, parents: &mut BTreeMap<VersionId, VersionId>, bound: usize) {
    loop {
        let depth = depths(parents);
        let Some((&v, &dv)) = depth
            .iter()
            .filter(|(_, &d)| d > bound)
            .min_by_key(|(&v, &d)| (d, v))
        else {
            return;
        };
        let mut best: Option<(i128, VersionId, VersionId)> = None;
        let mut a = v;
        while parents[&a] != ROOT {
            let hops = dv - depth[&a];
            let current = graph.weight(parents[&a], a).unwrap() as i128;
            let sub = subtree(parents, a);
            for (u, w) in graph.candidates(a) {
                if u == parents[&a] || (u != ROOT && sub.contains(&u)) {
                    continue;
                }
                let new_depth = if u == ROOT { 0 } else { depth[&u] + 1 };
                if new_depth >= depth[&a] || new_depth + hops > bound {
                    continue;
                }
                let option = (w as i128 - current, a, u);
                if best.is_none_or(|b| option < b) {
                    best = Some(option);
                }
            }
            a = parents[&a];
        }
        let (_, node, parent) = best.expect("materializing the violator is always possible");
        parents.insert(node, parent);
    }
}

/// Re-attaches single versions to cheaper bases while the bound holds.
fn improve(graph: &CostGraph, parents: &mut BTreeMap<VersionId, VersionId>, bound: usize) {
    let mut changed = true;
    while changed {
        changed = false;
        let nodes: Vec<VersionId> = parents.keys().copied().collect();
        for v in nodes {
            let depth = depths(parents);
            let sub = subtree(parents, v);
            let height = sub.iter().map(|x| depth[x]).max().unwrap() - depth[&v];
            let current = graph.weight(parents[&v], v).unwrap();
            let mut best: Option<(u64, VersionId)> = None;
            for (u, w) in graph.candidates(v) {
                if u == parents[&v] || (u != ROOT && sub.contains(&u)) {
                    continue;
                }
                let new_depth = if u == ROOT { 0 } else { depth[&u] + 1 };
                if new_depth + height > bound || w >= current {
                    continue;
                }
                if best.is_none_or(|b| (w, u) < b) {
                    best = Some((w, u));
                }
            }
            if let Some((_, u)) = best {
                parents.insert(v, u);
                changed = true;
            }
        }
    }
}

fn moves(graph: &CostGraph, parents: &BTreeMap<VersionId, VersionId>) -> Vec<(VersionId, VersionId)> {
    let mut out = Vec::new();
    for &v in parents.keys() {
        let sub = subtree(parents, v);
        for (u, _) in graph.candidates(v) {
            if u != parents[&v] && (u == ROOT || !sub.contains(&u)) {
                out.push((v, u));
            }
        }
    }
    out
}

/// Forces one version (two on small graphs) onto another base, repairs and
/// polishes the result, and keeps the cheapest plan found. Returns whether
/// it moved.
fn search(graph: &CostGraph, parents: &mut BTreeMap<VersionId, VersionId>, bound: usize) -> bool {
    let mut best = (cost_of(graph, parents), None);
    let mut consider = |trial: &mut BTreeMap<VersionId, VersionId>| {
        repair_depth(graph, trial, bound);
        improve(graph, trial, bound);
        let cost = cost_of(graph, trial);
        if cost < best.0 {
            best = (cost, Some(trial.clone()));
        }
    };
    for (v, u) in moves(graph, parents) {
        let mut first = parents.clone();
        first.insert(v, u);
        consider(&mut first.clone());
        if graph.len() > PAIR_LIMIT {
            continue;
        }
        for (v2, u2) in moves(graph, &first) {
            let mut second = first.clone();
            second.insert(v2, u2);
            consider(&mut second);
        }
    }
    match best.1 {
        Some(p) => {
            *parents = p;
            true
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Placement;

    fn chain(n: u64, snap: u64, delta: u64) -> CostGraph {
        let mut g = CostGraph::new();
        for v in 1..=n {
            g.add_node(v, snap);
            if v > 1 {
                g.add_edge(v - 1, v, delta);
                g.add_edge(v, v - 1, delta);
            }
        }
        g
    }

    #[test]
    fn expensive_deltas_mean_snapshots() {
        let g = chain(4, 10, 50);
        let plan = ArborescencePlanner.plan(&g, 3).unwrap();
        assert_eq!(plan.snapshots(), 4);
    }

    #[test]
    fn cheap_chain_keeps_one_snapshot() {
        let g = chain(5, 1000, 1);
        let plan = ArborescencePlanner.plan(&g, 8).unwrap();
        assert_eq!(plan.snapshots(), 1);
        assert_eq!(plan.total_cost(&g), 1000 + 4);
        plan.validate(&g).unwrap();
    }

    #[test]
    fn depth_bound_forces_extra_snapshots() {
        let g = chain(7, 1000, 1);
        for bound in 1..=6 {
            let plan = ArborescencePlanner.plan(&g, bound).unwrap();
            plan.validate(&g).unwrap();
            // a bidirectional chain of 7 needs ceil(7 / (2*bound+1)) snapshots
            assert_eq!(plan.snapshots(), 7usize.div_ceil(2 * bound + 1), "bound {bound}");
        }
    }

    #[test]
    fn contraction_resolves_cycles() {
        // cheap 2-cycle between 1 and 2; 3 hangs off 2
        let mut g = CostGraph::new();
        g.add_node(1, 100);
        g.add_node(2, 120);
        g.add_node(3, 100);
        g.add_edge(1, 2, 5);
        g.add_edge(2, 1, 4);
        g.add_edge(2, 3, 7);
        let tree = min_arborescence(&g).unwrap();
        // entering the cycle at 1 (100) then 1->2 (5) beats entering at 2 (120) + 2->1 (4)
        assert_eq!(tree[&1], ROOT);
        assert_eq!(tree[&2], 1);
        assert_eq!(tree[&3], 2);
        let plan = ArborescencePlanner.plan(&g, 1).unwrap();
        plan.validate(&g).unwrap();
        // snapshot 2 (120) with 1 and 3 hanging off it (4 + 7)
        assert_eq!(plan.placements[&2], Placement::Materialize);
        assert_eq!(plan.total_cost(&g), 131);
    }
}
