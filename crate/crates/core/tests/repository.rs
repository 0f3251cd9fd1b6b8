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

use std::collections::BTreeSet;

use dsvc_core::repo::{Config, MergeOptions, MergeOutcome, Repository};
use dsvc_core::{CheckoutMode, Dataset, Error, Provenance, Record, Table};
use dsvc_testkit::plain;

fn names(ds: &Dataset) -> BTreeSet<String> {
    ds.table("R")
        .unwrap()
        .records()
        .map(|r| r.get("name").and_then(|v| match v {
            dsvc_core::Value::Text(s) => Some(s.clone()),
            _ => None,
        }).unwrap())
        .collect()
}

fn person(key: &str, name: &str) -> Record {
    Record::from_pairs(key, [("name", name)]).unwrap()
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn people_history(dir: &std::path::Path) -> Repository {
    let mut repo = Repository::init(dir).unwrap();
    let table = Table::with_records("R", [person("1", "Sam"), person("2", "Amol")]).unwrap();
    let ds = Dataset::from_tables([table]).unwrap();
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
    repo
}

#[test]
fn people_memberships_and_cell_merge() {
    let dir = tempfile::tempdir().unwrap();
    let mut repo = people_history(dir.path());
    let master = repo.materialize(repo.resolve("master").unwrap()).unwrap();
    let side = repo.materialize(repo.resolve("v1.1").unwrap()).unwrap();
    assert_eq!(names(&master), set(&["Sam", "Amol", "Mike"]));
    assert_eq!(names(&side), set(&["Sam", "Aditya"]));
    assert_eq!(dsvc_core::diff_recs(&master, &side), 3);
    match repo.merge("master", "v1.1", MergeOptions::default()).unwrap() {
        MergeOutcome::Merged { dataset, resolved, created, .. } => {
            assert!(created);
            assert_eq!(resolved, 0);
            assert_eq!(names(&dataset), set(&["Sam", "Mike", "Aditya"]));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn distances_and_lca_on_people() {
    let dir = tempfile::tempdir().unwrap();
    let repo = people_history(dir.path());
    assert_eq!(repo.distance(1, 1).unwrap(), 0);
    assert_eq!(repo.distance(1, 4).unwrap(), 2);
    assert_eq!(repo.distance(2, 4).unwrap(), -1);
    assert_eq!(repo.lca(2, 4).unwrap(), 1);
}

#[test]
fn stale_working_copy_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mut repo = people_history(dir.path());
    let mut a = repo.checkout("master", CheckoutMode::Full).unwrap();
    let mut b = repo.checkout("master", CheckoutMode::Full).unwrap();
    a.stage_insert("R", person("9", "Zoe")).unwrap();
    b.stage_insert("R", person("8", "Yan")).unwrap();
    repo.commit(&mut a, Provenance::new("a", "t")).unwrap();
    assert!(matches!(
        repo.commit(&mut b, Provenance::new("b", "t")),
        Err(Error::StaleBase { .. })
    ));
}

#[test]
fn detached_checkout_cannot_commit() {
    let dir = tempfile::tempdir().unwrap();
    let mut repo = people_history(dir.path());
    let mut wc = repo.checkout("v2", CheckoutMode::Full).unwrap();
    wc.stage_delete("R", "1").unwrap();
    assert!(matches!(
        repo.commit(&mut wc, Provenance::new("x", "t")),
        Err(Error::DetachedHead)
    ));
}

#[test]
fn empty_commit_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut repo = people_history(dir.path());
    let mut wc = repo.checkout("master", CheckoutMode::Full).unwrap();
    assert!(matches!(
        repo.commit(&mut wc, Provenance::new("x", "t")),
        Err(Error::EmptyCommit)
    ));
}

#[test]
fn second_dataset_is_a_duplicate() {
    let dir = tempfile::tempdir().unwrap();
    let mut repo = people_history(dir.path());
    assert!(matches!(
        repo.create_dataset("again", Dataset::new(), Provenance::new("x", "t")),
        Err(Error::Duplicate(_))
    ));
}

#[test]
fn reset_moves_head_back_and_keeps_versions() {
    let dir = tempfile::tempdir().unwrap();
    let mut repo = people_history(dir.path());
    assert_eq!(repo.reset_hard("v1.1", "v3").unwrap(), 3);
    assert_eq!(repo.resolve("v1.1").unwrap(), 3);
    assert!(repo.graph().contains(4));
    assert!(matches!(
        repo.reset_hard("v1.1", "v2"),
        Err(Error::ResetRefused(_))
    ));
}

#[test]
fn reopen_preserves_everything() {
    let dir = tempfile::tempdir().unwrap();
    let repo = people_history(dir.path());
    let graph = repo.graph().to_json();
    let plan = repo.plan();
    let snaps: Vec<_> = repo.graph().ids().map(|v| plain(&repo.materialize(v).unwrap())).collect();
    drop(repo);
    let repo = Repository::open(dir.path()).unwrap();
    assert_eq!(repo.graph().to_json(), graph);
    assert_eq!(repo.plan(), plan);
    let again: Vec<_> = repo.graph().ids().map(|v| plain(&repo.materialize(v).unwrap())).collect();
    assert_eq!(again, snaps);
    assert!(repo.verify().unwrap().is_ok());
}

#[test]
fn sampled_checkout_commit_reaches_full_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let mut repo = Repository::init(dir.path()).unwrap();
    let rows = (0..200).map(|i| Record::from_pairs(format!("k{i}"), [("x", i as i64)]).unwrap());
    let ds = Dataset::from_tables([Table::with_records("T", rows).unwrap()]).unwrap();
    repo.create_dataset("d", ds, Provenance::new("root", "t")).unwrap();
    let mode = CheckoutMode::sampled(0.1, 7).unwrap();
    let mut wc = repo.checkout("master", mode).unwrap();
    assert!(wc.dataset().record_count() < 200);
    let pred = dsvc_core::predicate::Predicate::new(vec![dsvc_core::predicate::Comparison::attr(
        "x",
        dsvc_core::predicate::CmpOp::Ge,
        150i64,
    )]);
    let mut changes = std::collections::BTreeMap::new();
    changes.insert("flag".to_string(), dsvc_core::Value::Bool(true));
    wc.stage_update_where("T", pred, changes).unwrap();
    let v = repo.commit(&mut wc, Provenance::new("flag", "t")).unwrap();
    let full = repo.materialize(v).unwrap();
    let flagged = full.table("T").unwrap().records().filter(|r| r.get("flag").is_some()).count();
    assert_eq!(flagged, 50);
}

#[test]
fn replan_and_compact_keep_contents() {
    let dir = tempfile::tempdir().unwrap();
    let config = Config { max_chain: 2, ..Config::default() };
    let mut repo = Repository::init_with(dir.path(), config).unwrap();
    let rows = (0..300).map(|i| Record::from_pairs(format!("k{i}"), [("x", i as i64)]).unwrap());
    let ds = Dataset::from_tables([Table::with_records("T", rows).unwrap()]).unwrap();
    repo.create_dataset("d", ds, Provenance::new("root", "t")).unwrap();
    for i in 0..8 {
        let mut wc = repo.checkout("master", CheckoutMode::Full).unwrap();
        wc.stage_delete("T", &format!("k{i}")).unwrap();
        repo.commit(&mut wc, Provenance::new("del", "t")).unwrap();
    }
    let before: Vec<_> = repo.graph().ids().map(|v| plain(&repo.materialize(v).unwrap())).collect();
    let report = repo.replan(Some(3), Some("arborescence")).unwrap();
    assert!(report.plan.depths().unwrap().values().all(|&d| d <= 3));
    let after: Vec<_> = repo.graph().ids().map(|v| plain(&repo.materialize(v).unwrap())).collect();
    assert_eq!(before, after);
    assert!(repo.verify().unwrap().is_ok());
    assert!(matches!(repo.compact(1), Err(Error::BudgetInfeasible { .. })));
}
