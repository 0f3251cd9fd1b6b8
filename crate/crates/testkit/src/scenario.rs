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

//! Random version DAGs driven through a real repository, mirrored in memory.

use std::collections::BTreeMap;
use std::path::Path;

use dsvc_core::repo::{Config, Edit, MergeOptions, MergeOutcome, Repository};
use dsvc_core::{CheckoutMode, Error, Provenance, VersionId};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::gen::{random_dataset, random_edits, rng};
use crate::graphs::{self, Parents};
use crate::oracle::{merge_rows, plain, Plain};

#[derive(Debug, Clone, Copy)]
pub struct ScenarioParams {
    pub max_versions: usize,
    pub max_records: usize,
    /// Fraction of records touched per commit.
    pub churn: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            max_versions: 50,
            max_records: 10_000,
            churn: 0.02,
        }
    }
}

/// Expected state of every version.
#[derive(Debug, Clone, Default)]
pub struct Oracle {
    pub snapshots: BTreeMap<VersionId, Plain>,
    pub parents: Parents,
    pub branches: BTreeMap<String, VersionId>,
}

pub struct Scenario {
    pub repo: Repository,
    pub oracle: Oracle,
}

fn log_uniform<R: Rng>(rng: &mut R, max: usize) -> usize {
    let hi = (max.max(2) as f64).ln();
    (rng.gen_range(0.0..hi).exp() as usize).clamp(1, max.max(1))
}

/// Builds a random history of commits, branches and row-policy merges.
pub fn build(path: &Path, seed: u64, params: ScenarioParams) -> Scenario {
    build_with(path, seed, params, Config::default())
}

pub fn build_with(path: &Path, seed: u64, params: ScenarioParams, config: Config) -> Scenario {
    let mut rng = rng(seed);
    let mut repo = Repository::init_with(path, config).expect("init");
    let records = log_uniform(&mut rng, params.max_records);
    let tables = rng.gen_range(1..=2);
    let ds = random_dataset(&mut rng, tables, records);
    let root = repo
        .create_dataset("data", ds.clone(), Provenance::new("root", "gen"))
        .expect("create");
    let master = repo.config().default_branch.clone();
    let mut oracle = Oracle::default();
    oracle.snapshots.insert(root, plain(&ds));
    oracle.parents.insert(root, Vec::new());
    oracle.branches.insert(master, root);
    let target = rng.gen_range(1..=params.max_versions.max(1));
    let mut attempts = 0;
    while oracle.snapshots.len() < target && attempts < target * 10 {
        attempts += 1;
        let roll = rng.gen_range(0..100);
        if roll < 15 && oracle.branches.len() < 6 {
            let from = *oracle.snapshots.keys().collect::<Vec<_>>().choose(&mut rng).unwrap();
            let name = format!("b{}", oracle.branches.len());
            repo.branch(&name, &format!("v{from}")).expect("branch");
            oracle.branches.insert(name.clone(), *from);
            commit(&mut repo, &mut oracle, &mut rng, &name, records, params.churn);
        } else if roll < 30 && oracle.branches.len() > 1 {
            let names: Vec<String> = oracle.branches.keys().cloned().collect();
            let into = names.choose(&mut rng).unwrap().clone();
            let from = names.choose(&mut rng).unwrap().clone();
            if into != from {
                merge(&mut repo, &mut oracle, &into, &from);
            }
        } else {
            let names: Vec<String> = oracle.branches.keys().cloned().collect();
            let name = names.choose(&mut rng).unwrap().clone();
            commit(&mut repo, &mut oracle, &mut rng, &name, records, params.churn);
        }
    }
    Scenario { repo, oracle }
}

fn commit<R: Rng>(
    repo: &mut Repository,
    oracle: &mut Oracle,
    rng: &mut R,
    branch: &str,
    records: usize,
    churn: f64,
) {
    let head = oracle.branches[branch];
    let mut state = oracle.snapshots[&head].clone();
    let n = ((records as f64 * churn).ceil() as usize).clamp(1, 200);
    let n = rng.gen_range(1..=n);
    let edits: Vec<Edit> = random_edits(rng, &mut state, n, true);
    let mut wc = repo.checkout(branch, CheckoutMode::Full).expect("checkout");
    for e in edits {
        wc.apply(e).expect("edit applies");
    }
    match repo.commit(&mut wc, Provenance::new("edit", "gen")) {
        Ok(v) => {
            oracle.snapshots.insert(v, state);
            oracle.parents.insert(v, vec![head]);
            oracle.branches.insert(branch.to_string(), v);
        }
        Err(Error::EmptyCommit) => assert_eq!(state, oracle.snapshots[&head]),
        Err(e) => panic!("commit failed: {e}"),
    }
}

fn merge(repo: &mut Repository, oracle: &mut Oracle, into: &str, from: &str) {
    let (a, b) = (oracle.branches[into], oracle.branches[from]);
    let base = graphs::lca(&oracle.parents, a, b).expect("single root");
    let options = MergeOptions {
        strategy: Some("row".into()),
        ..Default::default()
    };
    let outcome = repo.merge(into, from, options).expect("merge");
    if base == b {
        assert!(matches!(outcome, MergeOutcome::Merged { created: false, .. }));
        return;
    }
    let expected = merge_rows(
        &oracle.snapshots[&base],
        &oracle.snapshots[&a],
        &oracle.snapshots[&b],
    );
    match (outcome, expected) {
        (MergeOutcome::Merged { version, .. }, Ok(p)) => {
            oracle.snapshots.insert(version, p);
            oracle.parents.insert(version, vec![a, b]);
            oracle.branches.insert(into.to_string(), version);
        }
        (MergeOutcome::Conflicted { report, .. }, Err(keys)) => {
            let mut got: Vec<(String, String)> =
                report.into_iter().map(|c| (c.table, c.key)).collect();
            got.sort();
            got.dedup();
            assert_eq!(got, keys, "conflict sets differ");
        }
        (MergeOutcome::Merged { .. }, Err(keys)) => panic!("expected conflicts on {keys:?}"),
        (MergeOutcome::Conflicted { report, .. }, Ok(_)) => {
            panic!("unexpected conflicts: {} keys", report.len())
        }
    }
}
