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

use dsvc_core::repo::Repository;
use dsvc_core::{CheckoutMode, Dataset, Provenance, Record, Table, Value};
use dsvc_testkit::gen::rng;
use dsvc_testkit::scenario::{build, ScenarioParams};
use dsvc_testkit::vqlgen::{self, Expected};
use dsvc_vql::{evaluate_with, evaluate_with_stats, parse, run, Options, VqlError};

fn person(key: &str, name: &str) -> Record {
    Record::from_pairs(key, [("name", name)]).unwrap()
}

/// v1 {Ann}, v2 {Ann, Bo}, v3 {Ann, Bo, Hector}, v4 {Ann, Bo}, v5 {Ann, Bo, Hector}.
fn hector_repo(dir: &std::path::Path) -> Repository {
    let mut repo = Repository::init(dir).unwrap();
    let ds = Dataset::from_tables([Table::with_records("R", [person("1", "Ann")]).unwrap()]).unwrap();
    repo.create_dataset("people", ds, Provenance::new("v1", "t")).unwrap();
    let mut wc = repo.checkout("master", CheckoutMode::Full).unwrap();
    wc.stage_insert("R", person("2", "Bo")).unwrap();
    repo.commit(&mut wc, Provenance::new("v2", "t")).unwrap();
    wc.stage_insert("R", person("3", "Hector")).unwrap();
    repo.commit(&mut wc, Provenance::new("v3", "t")).unwrap();
    wc.stage_delete("R", "3").unwrap();
    repo.commit(&mut wc, Provenance::new("v4", "t")).unwrap();
    wc.stage_insert("R", person("3", "Hector")).unwrap();
    repo.commit(&mut wc, Provenance::new("v5", "t")).unwrap();
    repo
}

const HECTOR: &str =
    "SELECT VNUM FROM VERSIONS(R) WHERE EXISTS (SELECT * FROM R(VNUM) WHERE name = 'Hector')";

fn ints(rows: &[Vec<Value>]) -> Vec<i64> {
    rows.iter()
        .map(|r| match r[0] {
            Value::Int(n) => n,
            ref other => panic!("{other:?}"),
        })
        .collect()
}

#[test]
fn hector_query_both_routes() {
    let dir = tempfile::tempdir().unwrap();
    let repo = hector_repo(dir.path());
    let q = parse(HECTOR).unwrap();
    for record_first in [true, false] {
        let (rs, stats) = evaluate_with_stats(&repo, &q, Options { record_first }).unwrap();
        assert_eq!(ints(&rs.rows), vec![3, 5]);
        assert_eq!(rs.columns, vec!["VNUM"]);
        assert_eq!(stats.record_first_probes > 0, record_first);
    }
}

#[test]
fn diff_filter_and_distance() {
    let dir = tempfile::tempdir().unwrap();
    let repo = hector_repo(dir.path());
    let rs = run(&repo, "SELECT VNUM FROM VERSIONS(R) WHERE 1 > DIFF_RECS(R, VNUM, 3)").unwrap();
    assert_eq!(ints(&rs.rows), vec![3, 5]);
    let rs = run(&repo, "SELECT VNUM FROM VERSIONS(R) WHERE DISTANCE(R, 2, VNUM) = 2").unwrap();
    assert_eq!(ints(&rs.rows), vec![4]);
    let rs = run(&repo, "SELECT VNUM FROM VERSIONS(R) WHERE DISTANCE(R, VNUM, VNUM) != 0").unwrap();
    assert!(rs.rows.is_empty());
}

#[test]
fn nested_version_subquery_picks_first_growing_version() {
    let dir = tempfile::tempdir().unwrap();
    let repo = hector_repo(dir.path());
    let rs = run(
        &repo,
        "SELECT name FROM R(SELECT MIN(VR1.VNUM) FROM VERSIONS(R) VR1, VERSIONS(R) VR2 \
         WHERE DISTANCE(R,VR1.VNUM,VR2.VNUM)=1 AND DIFF_RECS(R,VR1.VNUM,VR2.VNUM)>0)",
    )
    .unwrap();
    assert_eq!(rs.rows, vec![vec![Value::Text("Ann".into())]]);
}

#[test]
fn bare_table_reads_master_head() {
    let dir = tempfile::tempdir().unwrap();
    let repo = hector_repo(dir.path());
    let rs = run(&repo, "SELECT COUNT(name), MIN(name), MAX(_key) FROM R").unwrap();
    assert_eq!(
        rs.rows,
        vec![vec![Value::Int(3), Value::Text("Ann".into()), Value::Text("3".into())]]
    );
}

#[test]
fn join_on_keys_across_versions() {
    let dir = tempfile::tempdir().unwrap();
    let repo = hector_repo(dir.path());
    let rs = run(&repo, "SELECT * FROM R(v2), R(v3) WHERE R(v2)._key = R(v3)._key").unwrap();
    assert_eq!(rs.columns, vec!["R(v2)._key", "R(v2).name", "R(v3)._key", "R(v3).name"]);
    assert_eq!(rs.rows.len(), 2);
}

#[test]
fn errors() {
    let dir = tempfile::tempdir().unwrap();
    let repo = hector_repo(dir.path());
    assert!(matches!(run(&repo, "SELECT * FROM Q"), Err(VqlError::UnknownTable(_))));
    assert!(matches!(run(&repo, "SELECT * FROM R(v99)"), Err(VqlError::UnknownVersion(_))));
    assert!(matches!(
        run(&repo, "SELECT * FROM R(SELECT VNUM FROM VERSIONS(R))"),
        Err(VqlError::NonScalarVersionSubquery(_))
    ));
    assert!(matches!(
        run(&repo, "SELECT * FROM R(v1), R(v2) WHERE name = 'x'"),
        Err(VqlError::Unresolved(_))
    ));
    assert!(matches!(
        run(&repo, "SELECT name, COUNT(name) FROM R"),
        Err(VqlError::TypeError(_))
    ));
    assert!(matches!(run(&repo, "SELECT VNUM FROM R"), Err(VqlError::Unresolved(_))));
    assert!(matches!(run(&repo, "SELECT FROM"), Err(VqlError::Syntax { .. })));
}

#[test]
fn missing_attributes_never_compare() {
    let dir = tempfile::tempdir().unwrap();
    let repo = hector_repo(dir.path());
    let rs = run(&repo, "SELECT _key FROM R WHERE age < 5 OR age >= 5").unwrap();
    assert!(rs.rows.is_empty());
    let rs = run(&repo, "SELECT _key FROM R WHERE NOT (age < 5)").unwrap();
    assert_eq!(rs.rows.len(), 3);
    let rs = run(&repo, "SELECT _key FROM R WHERE name > 3").unwrap();
    assert!(rs.rows.is_empty());
}

fn check_random(seed: u64, queries: usize) {
    let dir = tempfile::tempdir().unwrap();
    let params = ScenarioParams { max_versions: 12, max_records: 300, churn: 0.05 };
    let s = build(dir.path(), seed, params);
    let head = s.repo.resolve("master").unwrap();
    let mut r = rng(seed ^ 0x5eed);
    for _ in 0..queries {
        let (_, text, expected) = vqlgen::sample(&mut r, &s.oracle, head);
        let q = parse(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(parse(&q.to_string()).unwrap(), q, "{text}");
        let routed = evaluate_with(&s.repo, &q, Options { record_first: true });
        let plain = evaluate_with(&s.repo, &q, Options { record_first: false });
        match expected {
            Expected::Rows { width, rows } => {
                let got = routed.unwrap_or_else(|e| panic!("{text}: {e}"));
                assert_eq!(got.columns.len(), width, "{text}");
                assert_eq!(got.rows, rows, "{text}");
                assert_eq!(plain.unwrap().rows, rows, "{text}");
            }
            Expected::Error => {
                assert!(routed.is_err(), "{text}");
                assert!(plain.is_err(), "{text}");
            }
        }
    }
}

#[test]
fn random_queries_match_the_naive_evaluator() {
    for seed in 0..4 {
        check_random(seed, 60);
    }
}
