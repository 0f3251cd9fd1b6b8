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

//! Acceptance gate. Each criterion prints one `criterion N: PASS|FAIL` line
//! to stderr.
//!
//! Run with `cargo test -p dsvc-cli --test acceptance -- --nocapture --test-threads=1`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use dsvc_core::merge::{merge_datasets, ConflictPolicy, PolicyRegistry};
use dsvc_core::planner::{CostGraph, ExhaustivePlanner, PlacementStrategy, PlannerRegistry};
use dsvc_core::repo::{Config, Edit, MergeOptions, MergeOutcome, Repository};
use dsvc_core::sketch::{estimate_diff, Sketch};
use dsvc_core::{CheckoutMode, Dataset, Error, Provenance, Record, Table, Value, VersionId, WorkingCopy};
use dsvc_testkit::gen::{random_dataset, random_edits, rng};
use dsvc_testkit::graphs::{bfs_distance, Parents};
use dsvc_testkit::oracle::{diff_count, merge_rows};
use dsvc_testkit::scenario::{build, Scenario, ScenarioParams};
use dsvc_testkit::vqlgen::{self, Expected};
use dsvc_testkit::{plain, Plain};
use rand::seq::SliceRandom;
use rand::Rng;

/// Writes to the raw stderr handle so the line shows even when output is captured.
fn report(n: u32, ok: bool, detail: String) {
    use std::io::Write;
    let line = format!("criterion {n}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

// ---------------------------------------------------------------- criterion 1

fn person(key: &str, name: &str) -> Record {
    Record::from_pairs(key, [("name", name)]).unwrap()
}

fn names(ds: &Dataset) -> BTreeSet<String> {
    ds.table("R")
        .unwrap()
        .records()
        .filter_map(|r| match r.get("name") {
            Some(Value::Text(s)) => Some(s.clone()),
            _ => None,
        })
        .collect()
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn criterion_01_golden_scenario() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut repo = Repository::init(dir.path()).unwrap();
    let ds = Dataset::from_tables([Table::with_records("R", [person("1", "Sam"), person("2", "Amol")]).unwrap()])
        .unwrap();
    repo.create_dataset("people", ds, Provenance::new("v1", "t")).unwrap();
    let mut wc = repo.checkout("master", CheckoutMode::Full).unwrap();
    wc.stage_insert("R", person("3", "Mike")).unwrap();
    repo.commit(&mut wc, Provenance::new("v2", "t")).unwrap();
    repo.branch("v1.1", "v1").unwrap();
    let mut wc = repo.checkout("v1.1", CheckoutMode::Full).unwrap();
    wc.stage_insert("R", person("4", "Aditya")).unwrap();
    repo.commit(&mut wc, Provenance::new("v3", "t")).unwrap();
    wc.stage_delete("R", "2").unwrap();
    repo.commit(&mut wc, Provenance::new("v4", "t")).unwrap();

    let master = repo.materialize(repo.resolve("master").unwrap()).unwrap();
    let side = repo.materialize(repo.resolve("v1.1").unwrap()).unwrap();
    let mut ok = names(&master) == set(&["Sam", "Amol", "Mike"]) && names(&side) == set(&["Sam", "Aditya"]);
    let diff = dsvc_core::diff_recs(&master, &side);
    ok &= diff == 3;
    let options = MergeOptions { strategy: Some("cell".into()), ..MergeOptions::default() };
    let merged = match repo.merge("master", "v1.1", options).unwrap() {
        MergeOutcome::Merged { dataset, resolved, .. } => {
            ok &= resolved == 0;
            names(&dataset)
        }
        MergeOutcome::Conflicted { report, .. } => {
            ok = false;
            BTreeSet::from([format!("{} conflicts", report.len())])
        }
    };
    ok &= merged == set(&["Sam", "Mike", "Aditya"]);
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1);
    report(1, ok, format!("merged {merged:?}, diff {diff}, {elapsed:.2?}"));
}

// ---------------------------------------------------------------- criterion 2

const RECORDS: usize = 100_000;
const ATTRS: usize = 10;
const VERSIONS: usize = 16;

fn attr_name(i: usize) -> String {
    format!("c{i}")
}

fn cell(rng: &mut impl Rng, i: usize) -> i64 {
    match i {
        0..=3 => rng.gen_range(0..100),
        4..=6 => rng.gen_range(0..1_000_000),
        _ => rng.gen_range(0..i64::MAX),
    }
}

fn to_record(key: usize, row: &[i64; ATTRS]) -> Record {
    Record::from_pairs(
        format!("r{key:06}"),
        row.iter().enumerate().map(|(i, v)| (attr_name(i), *v)),
    )
    .unwrap()
}

fn matches_oracle(ds: &Dataset, rows: &[[i64; ATTRS]]) -> bool {
    let Some(t) = ds.table("T") else { return false };
    ds.table_names().count() == 1
        && t.len() == rows.len()
        && rows.iter().enumerate().all(|(k, row)| {
            t.get(&format!("r{k:06}")).is_some_and(|r| {
                r.attrs().len() == ATTRS
                    && row
                        .iter()
                        .enumerate()
                        .all(|(i, v)| r.get(&attr_name(i)) == Some(&Value::Int(*v)))
            })
        })
}

fn dir_bytes(root: &Path) -> u64 {
    let mut total = 0;
    for e in std::fs::read_dir(root).unwrap().flatten() {
        let meta = e.metadata().unwrap();
        total += if meta.is_dir() { dir_bytes(&e.path()) } else { meta.len() };
    }
    total
}

#[test]
fn criterion_02_storage_compression() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = Config { max_chain: 8, ..Config::default() };
    let mut repo = Repository::init_with(dir.path(), config).unwrap();
    let mut r = rng(2);
    let mut rows: Vec<[i64; ATTRS]> = (0..RECORDS)
        .map(|_| std::array::from_fn(|i| cell(&mut r, i)))
        .collect();
    let table = Table::with_records("T", rows.iter().enumerate().map(|(k, row)| to_record(k, row))).unwrap();
    repo.create_dataset("big", Dataset::from_tables([table]).unwrap(), Provenance::new("v1", "t"))
        .unwrap();
    let mut history = vec![rows.clone()];
    let keys: Vec<usize> = (0..RECORDS).collect();
    for v in 1..VERSIONS {
        let mut wc = repo.checkout("master", CheckoutMode::Full).unwrap();
        for &k in keys.choose_multiple(&mut r, RECORDS / 100) {
            let i = r.gen_range(0..ATTRS);
            let mut value = cell(&mut r, i);
            while value == rows[k][i] {
                value = cell(&mut r, i);
            }
            rows[k][i] = value;
            let set = BTreeMap::from([(attr_name(i), Value::Int(value))]);
            wc.stage_update("T", &format!("r{k:06}"), set, Vec::new()).unwrap();
        }
        repo.commit(&mut wc, Provenance::new(format!("v{}", v + 1), "t")).unwrap();
        history.push(rows.clone());
    }
    repo.replan(Some(8), None).unwrap();

    let ids: Vec<VersionId> = repo.graph().ids().collect();
    let mut raw = 0u64;
    let mut equal = 0;
    for (v, expected) in ids.iter().zip(&history) {
        let ds = repo.materialize(*v).unwrap();
        raw += dsvc_core::codec::encode_snapshot(&ds, false).len() as u64;
        equal += matches_oracle(&ds, expected) as usize;
    }
    let stored = dir_bytes(repo.store().objects().root());
    let ratio = stored as f64 / raw as f64;
    let elapsed = start.elapsed();
    let ok = ids.len() == VERSIONS
        && equal == VERSIONS
        && ratio <= 0.25
        && repo.plan().validate_depths(8)
        && elapsed < Duration::from_secs(60);
    report(
        2,
        ok,
        format!(
            "{stored} stored / {raw} raw bytes = {:.1}%, {equal}/{VERSIONS} versions equal, {} snapshots, {elapsed:.1?}",
            ratio * 100.0,
            repo.plan().snapshots()
        ),
    );
}

trait DepthCheck {
    fn validate_depths(&self, bound: usize) -> bool;
}

impl DepthCheck for dsvc_core::planner::StoragePlan {
    fn validate_depths(&self, bound: usize) -> bool {
        self.depths().is_some_and(|d| d.values().all(|&x| x <= bound))
    }
}

// ------------------------------------------------------- criteria 3, 5 and 10

#[derive(Default)]
struct DagReport {
    dags: usize,
    versions: usize,
    vf_mismatch: Vec<String>,
    rf_mismatch: Vec<String>,
    distance_pairs: usize,
    self_zero: usize,
    siblings: usize,
    distance_mismatch: Vec<String>,
    diff_pairs: usize,
    diff_mismatch: Vec<String>,
    reopened: usize,
    reopen_mismatch: Vec<String>,
    elapsed: Duration,
}

const DAGS: u64 = 200;

/// Everything observable about a repository that must survive a reopen.
fn fingerprint(repo: &Repository) -> (String, String, String, Vec<Plain>) {
    let refs = format!("{:?}", repo.graph().refs());
    let plan = serde_json::to_string(&repo.plan()).unwrap();
    let snaps = repo.graph().ids().map(|v| plain(&repo.materialize(v).unwrap())).collect();
    (repo.graph().to_json(), refs, plan, snaps)
}

fn check_dag(seed: u64, dir: &Path, out: &mut DagReport) {
    let Scenario { repo, oracle } = build(dir, seed, ScenarioParams::default());
    out.dags += 1;
    out.versions += oracle.snapshots.len();
    let index = repo.record_index().unwrap();
    for (&v, expected) in &oracle.snapshots {
        if &plain(&repo.materialize(v).unwrap()) != expected {
            out.vf_mismatch.push(format!("seed {seed} v{v}"));
        }
        if &plain(&index.retrieve_version(v).unwrap()) != expected {
            out.rf_mismatch.push(format!("seed {seed} v{v}"));
        }
    }

    let parents: &Parents = &oracle.parents;
    let ids: Vec<VersionId> = oracle.snapshots.keys().copied().collect();
    for &a in &ids {
        for &b in &ids {
            let got = repo.distance(a, b).unwrap();
            let want = bfs_distance(parents, a, b);
            out.distance_pairs += 1;
            if a == b && got == 0 {
                out.self_zero += 1;
            }
            if want == -1 && bfs_distance(parents, b, a) == -1 {
                out.siblings += 1;
            }
            if got != want {
                out.distance_mismatch.push(format!("seed {seed} v{a}->v{b}: {got} vs {want}"));
            }
        }
    }
    let mut r = rng(seed ^ 0xd1ff);
    for _ in 0..ids.len().min(20) {
        let (a, b) = (*ids.choose(&mut r).unwrap(), *ids.choose(&mut r).unwrap());
        let want = diff_count(&oracle.snapshots[&a], &oracle.snapshots[&b]);
        let (da, db) = (repo.materialize(a).unwrap(), repo.materialize(b).unwrap());
        let got = dsvc_core::diff_recs(&da, &db);
        let ops = repo.diff(a, b).unwrap().op_count() as u64;
        out.diff_pairs += 1;
        if got != want || ops != want {
            out.diff_mismatch.push(format!("seed {seed} v{a}/v{b}: {got}/{ops} vs {want}"));
        }
    }

    let before = fingerprint(&repo);
    drop(index);
    drop(repo);
    let repo = Repository::open(dir).unwrap();
    out.reopened += 1;
    if fingerprint(&repo) != before {
        out.reopen_mismatch.push(format!("seed {seed}"));
    }
    if let Some((&v, expected)) = oracle.snapshots.iter().next_back() {
        if &plain(&repo.record_index().unwrap().retrieve_version(v).unwrap()) != expected {
            out.reopen_mismatch.push(format!("seed {seed} record-first v{v}"));
        }
    }
}

fn executable(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    path
}

fn dag_report() -> &'static DagReport {
    static REPORT: OnceLock<DagReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let start = Instant::now();
        let mut out = DagReport::default();
        for seed in 0..DAGS {
            let dir = tempfile::tempdir().unwrap();
            check_dag(1000 + seed, dir.path(), &mut out);
        }
        out.elapsed = start.elapsed();
        out
    })
}

#[test]
fn criterion_03_dual_representation() {
    let d = dag_report();
    let ok = d.dags == DAGS as usize && d.vf_mismatch.is_empty() && d.rf_mismatch.is_empty();
    report(
        3,
        ok,
        format!(
            "{} DAGs, {} versions, version-first mismatches {:?}, record-first mismatches {:?}, {:.1?}",
            d.dags, d.versions, d.vf_mismatch, d.rf_mismatch, d.elapsed
        ),
    );
}

#[test]
fn criterion_05_distance_and_diff() {
    let d = dag_report();
    let dir = tempfile::tempdir().unwrap();
    let mut repo = Repository::init(dir.path()).unwrap();
    let ds = Dataset::from_tables([Table::with_records("R", [person("1", "Sam")]).unwrap()]).unwrap();
    repo.create_dataset("d", ds, Provenance::new("v1", "t")).unwrap();
    repo.branch("side", "v1").unwrap();
    for (branch, key) in [("master", "2"), ("side", "3")] {
        let mut wc = repo.checkout(branch, CheckoutMode::Full).unwrap();
        wc.stage_insert("R", person(key, "x")).unwrap();
        repo.commit(&mut wc, Provenance::new("c", "t")).unwrap();
    }
    let fixed = repo.distance(2, 2).unwrap() == 0
        && repo.distance(2, 3).unwrap() == -1
        && repo.distance(3, 2).unwrap() == -1
        && repo.distance(1, 3).unwrap() == 1;
    let vql = dsvc_vql::run(&repo, "SELECT VNUM FROM VERSIONS(R) WHERE DISTANCE(R, 2, VNUM) = -1").unwrap();
    let vql_ok = vql.rows == vec![vec![Value::Int(1)], vec![Value::Int(3)]];
    let ok = fixed
        && vql_ok
        && d.self_zero == d.versions
        && d.siblings > 0
        && d.distance_mismatch.is_empty()
        && d.diff_mismatch.is_empty();
    report(
        5,
        ok,
        format!(
            "{} distance pairs ({} self, {} sibling), {} diff pairs, mismatches {:?} {:?}",
            d.distance_pairs, d.self_zero, d.siblings, d.diff_pairs, d.distance_mismatch, d.diff_mismatch
        ),
    );
}

#[test]
fn criterion_10_durability() {
    let d = dag_report();
    // Repositories with merges, replans, compaction and hooks on top of the DAG suite.
    let mut extra = 0;
    let mut bad = Vec::new();
    let scripts = tempfile::tempdir().unwrap();
    let hook = executable(scripts.path(), "ok.sh", "#!/bin/sh\nexit 0\n");
    for seed in 0..20u64 {
        let dir = tempfile::tempdir().unwrap();
        let params = ScenarioParams { max_versions: 20, max_records: 500, churn: 0.05 };
        let mut s = build(dir.path(), 7000 + seed, params);
        match seed % 3 {
            0 => {
                let small = s.repo.graph().len() <= 8;
                s.repo.replan(Some(2), Some("exhaustive").filter(|_| small)).unwrap();
            }
            1 => {
                s.repo.replan(Some(1), Some("snapshots")).unwrap();
            }
            _ => {
                let _ = s.repo.compact(u64::MAX / 2);
            }
        }
        s.repo
            .hooks()
            .install(dsvc_core::hooks::HookEvent::PostCommit, &hook, seed as i64)
            .unwrap_or_else(|e| panic!("install: {e}"));
        let hooks = s.repo.hooks().list(None).unwrap();
        let config = serde_json::to_string(s.repo.config()).unwrap();
        let before = fingerprint(&s.repo);
        drop(s);
        let repo = Repository::open(dir.path()).unwrap();
        extra += 1;
        if fingerprint(&repo) != before
            || repo.hooks().list(None).unwrap() != hooks
            || serde_json::to_string(repo.config()).unwrap() != config
            || !repo.verify().unwrap().is_ok()
        {
            bad.push(seed);
        }
    }
    let ok = d.reopened == DAGS as usize && d.reopen_mismatch.is_empty() && bad.is_empty();
    report(
        10,
        ok,
        format!(
            "{} DAG repositories and {extra} maintained repositories reopened, mismatches {:?} {bad:?}",
            d.reopened, d.reopen_mismatch
        ),
    );
}

// ---------------------------------------------------------------- criterion 4

fn hector_fixture(dir: &Path) -> (Repository, BTreeMap<VersionId, Plain>) {
    let mut repo = Repository::init(dir).unwrap();
    let mut r = rng(4);
    let row = |k: usize, r: &mut rand_chacha::ChaCha8Rng| {
        let name = ["Ann", "Bo", "Cy", "Hector", "Di"][r.gen_range(0..5)];
        Record::from_pairs(k.to_string(), [("id", Value::Int(r.gen_range(0..30))), ("name", Value::from(name))])
            .unwrap()
    };
    let first: Vec<Record> = (0..20).map(|k| row(k, &mut r)).collect();
    let s0 = Record::from_pairs("s", [("at", 1i64)]).unwrap();
    let ds = Dataset::from_tables([
        Table::with_records("R", first).unwrap(),
        Table::with_records("S", [s0]).unwrap(),
    ])
    .unwrap();
    let v1 = repo.create_dataset("d", ds.clone(), Provenance::new("v1", "t")).unwrap();
    let mut snaps = BTreeMap::from([(v1, plain(&ds))]);
    let mut next = 20;
    for v in 2..=140usize {
        let mut wc = repo.checkout("master", CheckoutMode::Full).unwrap();
        let grow = if v == 61 { 150 } else { r.gen_range(0..4) };
        for _ in 0..grow {
            wc.stage_insert("R", row(next, &mut r)).unwrap();
            next += 1;
        }
        let keys: Vec<String> = wc.dataset().table("R").unwrap().keys().cloned().collect();
        if r.gen_bool(0.5) {
            wc.stage_delete("R", keys.choose(&mut r).unwrap()).unwrap();
        }
        let set = BTreeMap::from([("at".to_string(), Value::Int(v as i64))]);
        wc.stage_update("S", "s", set, Vec::new()).unwrap();
        let id = repo.commit(&mut wc, Provenance::new(format!("v{v}"), "t")).unwrap();
        snaps.insert(id, plain(wc.dataset()));
    }
    (repo, snaps)
}

fn sorted(mut rows: Vec<Vec<Value>>) -> Vec<Vec<Value>> {
    rows.sort();
    rows
}

/// Brute-force answers for the three example queries.
fn example_oracles(snaps: &BTreeMap<VersionId, Plain>) -> [Vec<Vec<Value>>; 3] {
    let table = |v: VersionId| &snaps[&v]["R"];
    let mut join = Vec::new();
    for (ka, ra) in table(124) {
        for (kb, rb) in table(135) {
            if ra["id"] == rb["id"] {
                join.push(vec![
                    Value::Text(ka.clone()),
                    ra["id"].clone(),
                    ra["name"].clone(),
                    Value::Text(kb.clone()),
                    rb["id"].clone(),
                    rb["name"].clone(),
                ]);
            }
        }
    }
    let hector = snaps
        .iter()
        .filter(|(_, p)| p["R"].values().any(|r| r["name"] == Value::from("Hector")))
        .map(|(v, _)| vec![Value::Int(*v as i64)])
        .collect();
    let r_only = |v: VersionId| Plain::from([("R".to_string(), table(v).clone())]);
    let first = snaps
        .keys()
        .filter(|&&a| {
            snaps.keys().any(|&b| b == a + 1 && diff_count(&r_only(a), &r_only(b)) > 100)
        })
        .min()
        .copied();
    let nested = first
        .map(|v| {
            snaps[&v]["S"]
                .iter()
                .map(|(k, r)| vec![Value::Text(k.clone()), r["at"].clone()])
                .collect()
        })
        .unwrap_or_default();
    [sorted(join), sorted(hector), sorted(nested)]
}

const EXAMPLE_QUERIES: [&str; 3] = [
    "SELECT * FROM R(v124), R(v135) WHERE R(v124).id = R(v135).id",
    "SELECT VNUM FROM VERSIONS(R) WHERE EXISTS (SELECT * FROM R(VNUM) WHERE name = 'Hector')",
    "SELECT * FROM S(SELECT MIN(VR1.VNUM) FROM VERSIONS(R) VR1, VERSIONS(R) VR2 \
     WHERE DISTANCE(R,VR1.VNUM,VR2.VNUM)=1 AND DIFF_RECS(R,VR1.VNUM,VR2.VNUM)>100)",
];

#[test]
fn criterion_04_vql() {
    let dir = tempfile::tempdir().unwrap();
    let (repo, snaps) = hector_fixture(dir.path());
    let oracles = example_oracles(&snaps);
    let mut failures = Vec::new();
    for (text, want) in EXAMPLE_QUERIES.iter().zip(&oracles) {
        for record_first in [true, false] {
            let got = dsvc_vql::parse(text)
                .and_then(|q| dsvc_vql::evaluate_with(&repo, &q, dsvc_vql::Options { record_first }));
            match got {
                Ok(rs) if sorted(rs.rows.clone()) == *want && !want.is_empty() => {}
                Ok(rs) => failures.push(format!("{text}: {} rows vs {}", rs.rows.len(), want.len())),
                Err(e) => failures.push(format!("{text}: {e}")),
            }
        }
    }

    let mut random = 0;
    for seed in 0..10u64 {
        let dir = tempfile::tempdir().unwrap();
        let params = ScenarioParams { max_versions: 12, max_records: 300, churn: 0.05 };
        let s = build(dir.path(), 4000 + seed, params);
        let head = s.repo.resolve("master").unwrap();
        let mut r = rng(4400 + seed);
        for _ in 0..100 {
            random += 1;
            let (_, text, expected) = vqlgen::sample(&mut r, &s.oracle, head);
            let q = match dsvc_vql::parse(&text) {
                Ok(q) => q,
                Err(e) => {
                    failures.push(format!("{text}: {e}"));
                    continue;
                }
            };
            for record_first in [true, false] {
                let got = dsvc_vql::evaluate_with(&s.repo, &q, dsvc_vql::Options { record_first });
                let agree = match (&expected, &got) {
                    (Expected::Rows { width, rows }, Ok(rs)) => rs.columns.len() == *width && &rs.rows == rows,
                    (Expected::Error, Err(_)) => true,
                    _ => false,
                };
                if !agree {
                    failures.push(format!("{text} (record_first={record_first})"));
                }
            }
        }
    }
    report(
        4,
        failures.is_empty() && random == 1000,
        format!("3 example queries and {random} random queries, mismatches {failures:?}"),
    );
}

// ---------------------------------------------------------------- criterion 6

fn random_cost_graph(r: &mut impl Rng) -> CostGraph {
    let n = r.gen_range(1..=6u64);
    let mut g = CostGraph::new();
    for v in 1..=n {
        g.add_node(v, r.gen_range(100..1000));
    }
    for u in 1..=n {
        for v in 1..=n {
            if u != v && r.gen_bool(0.6) {
                g.add_edge(u, v, r.gen_range(1..1000));
            }
        }
    }
    g
}

#[test]
fn criterion_06_planner_quality() {
    let registry = PlannerRegistry::default();
    let heuristic = registry.get("arborescence").unwrap();
    let mut r = rng(6);
    let (mut worst, mut bad, mut invalid) = (1.0f64, 0, 0);
    for _ in 0..500 {
        let g = random_cost_graph(&mut r);
        let bound = r.gen_range(1..=3);
        let h = heuristic.plan(&g, bound).unwrap();
        let e = ExhaustivePlanner.plan(&g, bound).unwrap();
        if h.validate(&g).is_err() || e.validate(&g).is_err() {
            invalid += 1;
        }
        let ratio = h.total_cost(&g) as f64 / e.total_cost(&g) as f64;
        worst = worst.max(ratio);
        if ratio > 1.2 {
            bad += 1;
        }
    }
    report(
        6,
        bad == 0 && invalid == 0,
        format!("500 graphs, worst ratio {worst:.3}, {bad} over 1.2, {invalid} invalid plans"),
    );
}

// ---------------------------------------------------------------- criterion 7

#[derive(Clone, Copy, Debug)]
enum Side {
    InsertSame,
    InsertOther,
    InsertNew,
    UpdateX2,
    UpdateX3,
    UpdateY,
    Delete,
}

fn edit(side: Side) -> Edit {
    let rec = |key: &str, x: i64| Record::from_pairs(key, [("x", x)]).unwrap();
    let upd = |attr: &str, v: i64| Edit::Update {
        table: "T".into(),
        key: "k".into(),
        set: BTreeMap::from([(attr.to_string(), Value::Int(v))]),
        unset: Vec::new(),
    };
    match side {
        Side::InsertSame => Edit::Insert { table: "T".into(), record: rec("n", 1) },
        Side::InsertOther => Edit::Insert { table: "T".into(), record: rec("n", 2) },
        Side::InsertNew => Edit::Insert { table: "T".into(), record: rec("m", 7) },
        Side::UpdateX2 => upd("x", 2),
        Side::UpdateX3 => upd("x", 3),
        Side::UpdateY => upd("y", 9),
        Side::Delete => Edit::Delete { table: "T".into(), key: "k".into() },
    }
}

fn truth_base() -> Arc<Dataset> {
    let k = Record::from_pairs("k", [("x", 1i64), ("y", 1i64)]).unwrap();
    Arc::new(Dataset::from_tables([Table::with_records("T", [k]).unwrap()]).unwrap())
}

fn edited(base: &Arc<Dataset>, edits: impl IntoIterator<Item = Edit>) -> Dataset {
    let mut wc = WorkingCopy::new(1, None, CheckoutMode::Full, base.clone());
    for e in edits {
        wc.apply(e).unwrap();
    }
    wc.dataset().clone()
}

/// Rows of table T as `key -> (x, y)`, with 0 for a missing attribute.
fn rows_of(ds: &Dataset) -> BTreeMap<String, (i64, i64)> {
    let num = |r: &Record, a: &str| match r.get(a) {
        Some(Value::Int(n)) => *n,
        _ => 0,
    };
    ds.table("T")
        .map(|t| t.records().map(|r| (r.key().to_string(), (num(r, "x"), num(r, "y")))).collect())
        .unwrap_or_default()
}

type Outcome = Option<&'static [(&'static str, i64, i64)]>;

/// Hand-written table: (a side, b side, row outcome, cell outcome); `None` is a conflict.
fn truth_table() -> Vec<(Side, Side, Outcome, Outcome)> {
    use Side::*;
    const K: (&str, i64, i64) = ("k", 1, 1);
    vec![
        // insert / insert
        (InsertSame, InsertSame, Some(&[K, ("n", 1, 0)]), Some(&[K, ("n", 1, 0)])),
        (InsertSame, InsertOther, None, None),
        (InsertSame, InsertNew, Some(&[K, ("m", 7, 0), ("n", 1, 0)]), Some(&[K, ("m", 7, 0), ("n", 1, 0)])),
        // insert / update and insert / delete touch different keys
        (InsertSame, UpdateX2, Some(&[("k", 2, 1), ("n", 1, 0)]), Some(&[("k", 2, 1), ("n", 1, 0)])),
        (UpdateX2, InsertSame, Some(&[("k", 2, 1), ("n", 1, 0)]), Some(&[("k", 2, 1), ("n", 1, 0)])),
        (InsertSame, Delete, Some(&[("n", 1, 0)]), Some(&[("n", 1, 0)])),
        (Delete, InsertSame, Some(&[("n", 1, 0)]), Some(&[("n", 1, 0)])),
        // update / update
        (UpdateX2, UpdateX2, Some(&[("k", 2, 1)]), Some(&[("k", 2, 1)])),
        (UpdateX2, UpdateX3, None, None),
        (UpdateX2, UpdateY, None, Some(&[("k", 2, 9)])),
        (UpdateY, UpdateX2, None, Some(&[("k", 2, 9)])),
        // update / delete
        (UpdateX2, Delete, None, None),
        (Delete, UpdateY, None, None),
        // delete / delete
        (Delete, Delete, Some(&[]), Some(&[])),
    ]
}

fn merge_outcome(policy: &dyn ConflictPolicy, base: &Dataset, a: &Dataset, b: &Dataset) -> Option<Plain> {
    let m = merge_datasets(base, a, b, policy, &Default::default());
    m.unresolved.is_empty().then(|| plain(&m.dataset))
}

#[test]
fn criterion_07_merge_truth_table() {
    let policies = PolicyRegistry::default();
    let (row, cell) = (policies.get("row").unwrap(), policies.get("cell").unwrap());
    let base = truth_base();
    let mut wrong = Vec::new();
    let table = truth_table();
    for (sa, sb, want_row, want_cell) in &table {
        let a = edited(&base, [edit(*sa)]);
        let b = edited(&base, [edit(*sb)]);
        for (policy, want) in [(row, want_row), (cell, want_cell)] {
            let m = merge_datasets(&base, &a, &b, policy, &Default::default());
            let got = m.unresolved.is_empty().then(|| rows_of(&m.dataset));
            let want: Option<BTreeMap<String, (i64, i64)>> =
                want.map(|rows| rows.iter().map(|(k, x, y)| (k.to_string(), (*x, *y))).collect());
            if got != want {
                wrong.push(format!("{sa:?}/{sb:?} under {}: {got:?}", policy.name()));
            }
        }
    }

    let mut r = rng(7);
    let (mut clean, mut asymmetric, mut oracle_mismatch) = (0, Vec::new(), 0);
    for pair in 0..200 {
        let (tables, records) = (r.gen_range(1..=2), r.gen_range(20..200));
        let base = random_dataset(&mut r, tables, records);
        let base_plain = plain(&base);
        let base = Arc::new(base);
        let (mut pa, mut pb) = (base_plain.clone(), base_plain.clone());
        let na = r.gen_range(1..=15);
        let nb = r.gen_range(1..=15);
        let a = edited(&base, random_edits(&mut r, &mut pa, na, true));
        let b = edited(&base, random_edits(&mut r, &mut pb, nb, true));
        for policy in [row, cell] {
            let ab = merge_outcome(policy, &base, &a, &b);
            let ba = merge_outcome(policy, &base, &b, &a);
            if ab.is_some() != ba.is_some() || (ab.is_some() && ab != ba) {
                asymmetric.push(format!("pair {pair} under {}", policy.name()));
            }
            clean += ab.is_some() as usize;
            if policy.name() == "row" && ab.clone().ok_or(()) != merge_rows(&base_plain, &pa, &pb).map_err(|_| ()) {
                oracle_mismatch += 1;
            }
        }
    }
    let ok = wrong.is_empty() && asymmetric.is_empty() && oracle_mismatch == 0 && clean > 100;
    report(
        7,
        ok,
        format!(
            "{} table rows under 2 strategies, wrong {wrong:?}; 200 random pairs, {clean} clean merges, asymmetric {asymmetric:?}, {oracle_mismatch} row-oracle mismatches",
            table.len()
        ),
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_08_sketch_accuracy() {
    const SIZE: usize = 5000;
    const TRIALS: usize = 1000;
    let mut r = rng(8);
    let mut within = 0;
    let mut by_band: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for trial in 0..TRIALS {
        let j: f64 = r.gen_range(0.5..=0.99);
        // |A| = |B| = SIZE and |A∩B| = i give J = i / (2 SIZE - i).
        let shared = ((2 * SIZE) as f64 * j / (1.0 + j)).round() as usize;
        let state = |tag: &str, i: usize| {
            Record::from_pairs(format!("{trial}-{tag}{i}"), [("v", i as i64)])
                .unwrap()
                .state_id()
                .prefix_u64()
        };
        let common: Vec<u64> = (0..shared).map(|i| state("c", i)).collect();
        let only_a = (0..SIZE - shared).map(|i| state("a", i));
        let only_b = (0..SIZE - shared).map(|i| state("b", i));
        let a = Sketch::from_hashes(common.iter().copied().chain(only_a), 256);
        let b = Sketch::from_hashes(common.iter().copied().chain(only_b), 256);
        let exact = (2 * (SIZE - shared)) as f64;
        let estimate = estimate_diff(&a, &b).unwrap();
        let hit = (estimate - exact).abs() / exact <= 0.25;
        within += hit as usize;
        let band = by_band.entry((j * 10.0).floor() as u32).or_default();
        band.0 += hit as usize;
        band.1 += 1;
    }
    let rate = within as f64 / TRIALS as f64;
    let bands: Vec<String> = by_band
        .iter()
        .map(|(b, (h, n))| format!("J>={:.1}: {h}/{n}", *b as f64 / 10.0))
        .collect();
    report(
        8,
        rate >= 0.95,
        format!("{within}/{TRIALS} trials within 25% ({:.1}%), {}", rate * 100.0, bands.join(", ")),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_09_hook_atomicity() {
    let dir = tempfile::tempdir().unwrap();
    let repo_dir = dir.path().join("repo");
    let mut s = build(&repo_dir, 9, ScenarioParams { max_versions: 6, max_records: 400, churn: 0.05 });
    let hook = executable(dir.path(), "reject.sh", "#!/bin/sh\necho rejected >&2\nexit 1\n");
    s.repo.hooks().install(dsvc_core::hooks::HookEvent::PreCommit, &hook, 0).unwrap();
    let branches: Vec<String> = s.oracle.branches.keys().cloned().collect();
    let mut copies: Vec<(WorkingCopy, Plain)> = branches
        .iter()
        .map(|b| {
            let wc = s.repo.checkout(b, CheckoutMode::Full).unwrap();
            let p = plain(wc.dataset());
            (wc, p)
        })
        .collect();
    let before = dsvc_testkit::fsutil::dir_hash(&repo_dir);
    let mut r = rng(99);
    let (mut rejected, mut changed, mut other) = (0, 0, Vec::new());
    for _ in 0..50 {
        let (wc, state) = copies.choose_mut(&mut r).unwrap();
        let mut scratch = state.clone();
        let n = r.gen_range(1..=10);
        for e in random_edits(&mut r, &mut scratch, n, true) {
            wc.apply(e).unwrap();
        }
        match s.repo.commit(wc, Provenance::new("attempt", "t")) {
            Err(Error::HookRejected { .. }) => rejected += 1,
            Err(Error::EmptyCommit) => rejected += 1,
            other_result => other.push(format!("{other_result:?}")),
        }
        s.repo.rollback(wc);
        if dsvc_testkit::fsutil::dir_hash(&repo_dir) != before {
            changed += 1;
        }
    }
    report(
        9,
        rejected == 50 && changed == 0 && other.is_empty(),
        format!("{rejected}/50 attempts rejected, {changed} changed the directory hash, unexpected {other:?}"),
    );
}


