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

//! Brute-force graph answers over a parent map.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub type Parents = BTreeMap<u64, Vec<u64>>;

pub fn ancestors(parents: &Parents, v: u64) -> BTreeSet<u64> {
    let mut seen = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(x) = stack.pop() {
        for &p in parents.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(p) {
                stack.push(p);
            }
        }
    }
    seen
}

/// Shortest directed path length from `from` to `to`; -1 when unreachable.
pub fn bfs_distance(parents: &Parents, from: u64, to: u64) -> i64 {
    let mut children: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for (&c, ps) in parents {
        for &p in ps {
            children.entry(p).or_default().push(c);
        }
    }
    let mut dist = BTreeMap::from([(from, 0i64)]);
    let mut q = VecDeque::from([from]);
    while let Some(x) = q.pop_front() {
        if x == to {
            return dist[&x];
        }
        let d = dist[&x];
        for &c in children.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(c) {
                e.insert(d + 1);
                q.push_back(c);
            }
        }
    }
    -1
}

/// Longest path from any root. Parents must have smaller ids than children.
pub fn depth(parents: &Parents, v: u64) -> usize {
    let mut memo: BTreeMap<u64, usize> = BTreeMap::new();
    for (&x, ps) in parents.range(..=v) {
        let d = ps.iter().map(|p| memo.get(p).copied().unwrap_or(0) + 1).max().unwrap_or(0);
        memo.insert(x, d);
    }
    memo.get(&v).copied().unwrap_or(0)
}

/// Among common ancestors that are not ancestors of another common
/// ancestor, the deepest, ties to the largest id.
pub fn lca(parents: &Parents, a: u64, b: u64) -> Option<u64> {
    let common: BTreeSet<u64> = ancestors(parents, a)
        .intersection(&ancestors(parents, b))
        .copied()
        .collect();
    let lowest: Vec<u64> = common
        .iter()
        .copied()
        .filter(|&c| {
            !common
                .iter()
                .any(|&o| o != c && ancestors(parents, o).contains(&c))
        })
        .collect();
    lowest.into_iter().max_by_key(|&c| (depth(parents, c), c))
}
