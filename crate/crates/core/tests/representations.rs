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

use dsvc_core::{apply_delta, compute_delta, diff_recs, invert_delta};
use dsvc_testkit::gen::{random_dataset, random_edits, rng};
use dsvc_testkit::graphs;
use dsvc_testkit::oracle::{apply_edit, diff_count};
use dsvc_testkit::plain;
use dsvc_testkit::scenario::{build, ScenarioParams};
use proptest::prelude::*;

fn small() -> ScenarioParams {
    ScenarioParams { max_versions: 20, max_records: 400, churn: 0.05 }
}

#[test]
fn both_representations_match_the_oracle() {
    for seed in 0..12 {
        let dir = tempfile::tempdir().unwrap();
        let s = build(dir.path(), seed, small());
        let index = s.repo.record_index().unwrap();
        for (v, expected) in &s.oracle.snapshots {
            assert_eq!(&plain(&s.repo.materialize(*v).unwrap()), expected, "seed {seed} v{v}");
            assert_eq!(&plain(&index.retrieve_version(*v).unwrap()), expected, "seed {seed} v{v}");
        }
    }
}

#[test]
fn distance_and_diff_agree_with_naive_versions() {
    for seed in 100..106 {
        let dir = tempfile::tempdir().unwrap();
        let s = build(dir.path(), seed, small());
        let ids: Vec<u64> = s.oracle.snapshots.keys().copied().collect();
        for &a in &ids {
            for &b in &ids {
                assert_eq!(
                    s.repo.distance(a, b).unwrap(),
                    graphs::bfs_distance(&s.oracle.parents, a, b)
                );
                let (da, db) = (s.repo.materialize(a).unwrap(), s.repo.materialize(b).unwrap());
                assert_eq!(
                    diff_recs(&da, &db),
                    diff_count(&s.oracle.snapshots[&a], &s.oracle.snapshots[&b])
                );
            }
        }
    }
}

#[test]
fn verify_passes_after_replanning_random_histories() {
    for seed in 200..204 {
        let dir = tempfile::tempdir().unwrap();
        let mut s = build(dir.path(), seed, small());
        s.repo.replan(Some(2), None).unwrap();
        let report = s.repo.verify().unwrap();
        assert!(report.is_ok(), "{:?}", report.problems);
        for (v, expected) in &s.oracle.snapshots {
            assert_eq!(&plain(&s.repo.materialize(*v).unwrap()), expected);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_round_trips(seed in any::<u64>(), n in 0usize..40) {
        let mut r = rng(seed);
        let base = random_dataset(&mut r, 2, 30);
        let mut state = plain(&base);
        let mut target_state = state.clone();
        let edits = random_edits(&mut r, &mut target_state, n, false);
        for e in &edits {
            prop_assert!(apply_edit(&mut state, e));
        }
        prop_assert_eq!(&state, &target_state);
        let mut wc = dsvc_core::WorkingCopy::new(0, None, dsvc_core::CheckoutMode::Full, std::sync::Arc::new(base.clone()));
        for e in edits {
            wc.apply(e).unwrap();
        }
        let target = wc.dataset().clone();
        prop_assert_eq!(plain(&target), target_state);
        let d = compute_delta(&base, &target);
        prop_assert_eq!(plain(&apply_delta(&base, &d).unwrap()), plain(&target));
        let inv = invert_delta(&d, &base).unwrap();
        prop_assert_eq!(plain(&apply_delta(&target, &inv).unwrap()), plain(&base));
        let decoded = dsvc_core::Delta::decode(&d.encode(true)).unwrap();
        prop_assert_eq!(decoded, d.clone());
        prop_assert_eq!(diff_recs(&base, &target), d.op_count() as u64);
    }

    #[test]
    fn diff_recs_is_a_symmetric_count(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_dataset(&mut r, 1, 25);
        let b = random_dataset(&mut r, 1, 25);
        prop_assert_eq!(diff_recs(&a, &b), diff_recs(&b, &a));
        prop_assert_eq!(diff_recs(&a, &b), diff_count(&plain(&a), &plain(&b)));
        prop_assert_eq!(diff_recs(&a, &a), 0);
    }
}
