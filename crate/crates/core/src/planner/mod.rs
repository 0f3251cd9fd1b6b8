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

//! Storage planning: choose, per version, a snapshot or a delta base so that
//! total stored bytes are small and no delta chain exceeds a hop bound.
//!
//! Strategies implement [`PlacementStrategy`] and are looked up by name in a
//! [`PlannerRegistry`].

mod arborescence;
mod cost;
mod exhaustive;

pub use arborescence::ArborescencePlanner;
pub use cost::{build_cost_graph, exact_delta_bytes, CostGraphOptions, NEAREST_NEIGHBORS};
pub use exhaustive::{ExhaustivePlanner, EXHAUSTIVE_LIMIT};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VersionId;
use crate::store::Placement;

/// Virtual root; an edge from it means "materialize".
pub const ROOT: VersionId = 0;

/// Candidate encodings: `snapshot[v]` to materialize `v`, `edges[(u, v)]`
/// to store `v` as a delta from `u`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostGraph {
    pub snapshot: BTreeMap<VersionId, u64>,
    pub edges: BTreeMap<(VersionId, VersionId), u64>,
}

impl CostGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, v: VersionId, snapshot_bytes: u64) {
        assert_ne!(v, ROOT, "version 0 is reserved for the virtual root");
        self.snapshot.insert(v, snapshot_bytes);
    }

    pub fn add_edge(&mut self, from: VersionId, to: VersionId, bytes: u64) {
        if from != to {
            self.edges.insert((from, to), bytes);
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = VersionId> + '_ {
        self.snapshot.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.snapshot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshot.is_empty()
    }

    /// Cost of storing `v` with parent `u` (`ROOT` = snapshot).
    pub fn weight(&self, u: VersionId, v: VersionId) -> Option<u64> {
        if u == ROOT {
            self.snapshot.get(&v).copied()
        } else {
            self.edges.get(&(u, v)).copied()
        }
    }

    /// Possible parents of `v`, including `ROOT`, ascending.
    pub fn candidates(&self, v: VersionId) -> Vec<(VersionId, u64)> {
        let mut out = Vec::new();
        if let Some(&w) = self.snapshot.get(&v) {
            out.push((ROOT, w));
        }
        // edges are keyed (from, to); scan for matching targets
        out.extend(
            self.edges
                .iter()
                .filter(|((_, to), _)| *to == v)
                .map(|((from, _), w)| (*from, *w)),
        );
        out
    }

    pub fn check_feasible(&self) -> Result<()> {
        for (&(u, v), _) in &self.edges {
            for x in [u, v] {
                if !self.snapshot.contains_key(&x) {
                    return Err(Error::InfeasibleGraph(x));
                }
            }
        }
        Ok(())
    }
}

/// A placement for every version plus the chain bound it was planned for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoragePlan {
    #[serde(rename = "L")]
    pub max_chain: usize,
    #[serde(with = "placements_serde")]
    pub placements: BTreeMap<VersionId, Placement>,
}

mod placements_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<VersionId, Placement>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let as_str: BTreeMap<String, &Placement> =
            map.iter().map(|(k, v)| (k.to_string(), v)).collect();
        as_str.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<VersionId, Placement>, D::Error> {
        let raw: BTreeMap<String, Placement> = BTreeMap::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                k.parse::<VersionId>()
                    .map(|k| (k, v))
                    .map_err(serde::de::Error::custom)
            })
            .collect()
    }
}

impl StoragePlan {
    pub fn from_parents(max_chain: usize, parents: &BTreeMap<VersionId, VersionId>) -> Self {
        StoragePlan {
            max_chain,
            placements: parents
                .iter()
                .map(|(&v, &u)| {
                    let p = if u == ROOT {
                        Placement::Materialize
                    } else {
                        Placement::DeltaFrom { from: u }
                    };
                    (v, p)
                })
                .collect(),
        }
    }

    pub fn parent(&self, v: VersionId) -> Option<VersionId> {
        self.placements.get(&v).map(|p| p.delta_from().unwrap_or(ROOT))
    }

    pub fn snapshots(&self) -> usize {
        self.placements
            .values()
            .filter(|p| **p == Placement::Materialize)
            .count()
    }

    /// Delta hops from each version to its snapshot; `None` on a cycle or dangling base.
    pub fn depths(&self) -> Option<BTreeMap<VersionId, usize>> {
        let mut depth = BTreeMap::new();
        for &v in self.placements.keys() {
            let mut path = Vec::new();
            let mut cur = v;
            let base = loop {
                if let Some(&d) = depth.get(&cur) {
                    break d;
                }
                match self.placements.get(&cur)? {
                    Placement::Materialize => {
                        depth.insert(cur, 0);
                        break 0;
                    }
                    Placement::DeltaFrom { from } => {
                        if path.contains(&cur) || path.len() > self.placements.len() {
                            return None;
                        }
                        path.push(cur);
                        cur = *from;
                    }
                }
            };
            for (i, node) in path.iter().rev().enumerate() {
                depth.insert(*node, base + i + 1);
            }
        }
        Some(depth)
    }

    /// Checks the forest and depth invariants against `graph`.
    pub fn validate(&self, graph: &CostGraph) -> Result<()> {
        let nodes: BTreeSet<VersionId> = graph.nodes().collect();
        let planned: BTreeSet<VersionId> = self.placements.keys().copied().collect();
        if nodes != planned {
            return Err(Error::Corrupt("plan does not cover the cost graph".into()));
        }
        for (&v, p) in &self.placements {
            if let Placement::DeltaFrom { from } = p {
                if graph.weight(*from, v).is_none() {
                    return Err(Error::Corrupt(format!("plan uses missing edge v{from}->v{v}")));
                }
            }
        }
        let depths = self
            .depths()
            .ok_or_else(|| Error::Corrupt("plan contains a cycle".into()))?;
        if let Some((v, d)) = depths.iter().find(|(_, d)| **d > self.max_chain) {
            return Err(Error::Corrupt(format!(
                "v{v} sits {d} deltas from a snapshot, bound is {}",
                self.max_chain
            )));
        }
        Ok(())
    }

    pub fn total_cost(&self, graph: &CostGraph) -> u64 {
        self.placements
            .iter()
            .map(|(&v, p)| graph.weight(p.delta_from().unwrap_or(ROOT), v).unwrap_or(u64::MAX / 4))
            .sum()
    }
}

/// A way of choosing placements.
pub trait PlacementStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn plan(&self, graph: &CostGraph, max_chain: usize) -> Result<StoragePlan>;
}

/// Materializes every version.
pub struct SnapshotPlanner;

impl PlacementStrategy for SnapshotPlanner {
    fn name(&self) -> &'static str {
        "snapshots"
    }

    fn description(&self) -> &'static str {
        "store every version as a full snapshot"
    }

    fn plan(&self, graph: &CostGraph, max_chain: usize) -> Result<StoragePlan> {
        Ok(StoragePlan {
            max_chain,
            placements: graph.nodes().map(|v| (v, Placement::Materialize)).collect(),
        })
    }
}

/// Strategies addressable by name.
pub struct PlannerRegistry {
    strategies: BTreeMap<&'static str, Box<dyn PlacementStrategy>>,
}

pub const DEFAULT_PLANNER: &str = "arborescence";

impl PlannerRegistry {
    pub fn empty() -> Self {
        PlannerRegistry {
            strategies: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, strategy: Box<dyn PlacementStrategy>) {
        self.strategies.insert(strategy.name(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn PlacementStrategy> {
        self.strategies
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownPlanner(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.strategies.keys().copied()
    }
}

impl Default for PlannerRegistry {
    fn default() -> Self {
        let mut reg = PlannerRegistry::empty();
        reg.register(Box::new(ArborescencePlanner));
        reg.register(Box::new(ExhaustivePlanner));
        reg.register(Box::new(SnapshotPlanner));
        reg
    }
}
