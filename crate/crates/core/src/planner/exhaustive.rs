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

//! Exhaustive search over depth-bounded arborescences; a reference for
//! small graphs.

use std::collections::BTreeMap;

use super::{CostGraph, PlacementStrategy, StoragePlan, ROOT};
use crate::error::{Error, Result};
use crate::model::VersionId;

pub const EXHAUSTIVE_LIMIT: usize = 8;

pub struct ExhaustivePlanner;

struct Search<'a> {
    nodes: Vec<VersionId>,
    /// Candidates per node: (index of parent or usize::MAX for the root, weight), ascending.
    options: Vec<Vec<(usize, u64)>>,
    /// Cheapest incoming weight of nodes i.. (suffix sums).
    lower: Vec<u64>,
    bound: usize,
    parent: Vec<usize>,
    best: Option<(u64, Vec<usize>)>,
    _graph: &'a CostGraph,
}

const NONE: usize = usize::MAX - 1;

impl Search<'_> {
    /// Hops from `v` up to a snapshot through assigned parents, or `None` when
    /// the walk meets an unassigned node. Returns `Err` on a cycle through `start`.
    fn depth(&self, v: usize, start: usize) -> std::result::Result<Option<usize>, ()> {
        let mut hops = 0;
        let mut x = v;
        loop {
            match self.parent[x] {
                usize::MAX => return Ok(Some(hops)),
                NONE => return Ok(None),
                p => {
                    if p == start {
                        return Err(());
                    }
                    hops += 1;
                    if hops > self.nodes.len() {
                        return Err(());
                    }
                    x = p;
                }
            }
        }
    }

    fn run(&mut self, i: usize, cost: u64) {
        if let Some((best, _)) = &self.best {
            if cost + self.lower[i] >= *best {
                return;
            }
        }
        if i == self.nodes.len() {
            if self.feasible() {
                self.best = Some((cost, self.parent.clone()));
            }
            return;
        }
        for k in 0..self.options[i].len() {
            let (p, w) = self.options[i][k];
            self.parent[i] = p;
            let ok = p == usize::MAX
                || match self.depth(p, i) {
                    Err(()) => false,
                    Ok(Some(d)) => d < self.bound,
                    Ok(None) => true,
                };
            if ok {
                self.run(i + 1, cost + w);
            }
        }
        self.parent[i] = NONE;
    }

    fn feasible(&self) -> bool {
        (0..self.nodes.len()).all(|v| matches!(self.depth(v, v), Ok(Some(d)) if d <= self.bound))
    }
}

impl PlacementStrategy for ExhaustivePlanner {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn description(&self) -> &'static str {
        "exact minimum by exhaustive search (at most 8 versions)"
    }

    fn plan(&self, graph: &CostGraph, max_chain: usize) -> Result<StoragePlan> {
        if graph.len() > EXHAUSTIVE_LIMIT {
            return Err(Error::TooLarge {
                size: graph.len(),
                limit: EXHAUSTIVE_LIMIT,
            });
        }
        graph.check_feasible()?;
        let nodes: Vec<VersionId> = graph.nodes().collect();
        let index: BTreeMap<VersionId, usize> =
            nodes.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let options: Vec<Vec<(usize, u64)>> = nodes
            .iter()
            .map(|&v| {
                let mut c: Vec<(VersionId, u64)> = graph.candidates(v);
                c.sort();
                c.into_iter()
                    .map(|(u, w)| (if u == ROOT { usize::MAX } else { index[&u] }, w))
                    .collect()
            })
            .collect();
        let mut lower = vec![0u64; nodes.len() + 1];
        for i in (0..nodes.len()).rev() {
            lower[i] = lower[i + 1] + options[i].iter().map(|o| o.1).min().unwrap_or(0);
        }
        let mut search = Search {
            parent: vec![NONE; nodes.len()],
            nodes,
            options,
            lower,
            bound: max_chain,
            best: None,
            _graph: graph,
        };
        search.run(0, 0);
        let (_, parent) = search
            .best
            .ok_or_else(|| Error::InfeasibleGraph(search.nodes.first().copied().unwrap_or(ROOT)))?;
        let parents: BTreeMap<VersionId, VersionId> = parent
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let u = if p == usize::MAX { ROOT } else { search.nodes[p] };
                (search.nodes[i], u)
            })
            .collect();
        Ok(StoragePlan::from_parents(max_chain, &parents))
    }
}
