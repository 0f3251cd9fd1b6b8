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

use dsvc_testkit::gen::rng;
use dsvc_testkit::scenario::Oracle;
use dsvc_testkit::vqlgen::{random_query, render};
use dsvc_vql::parse;
use proptest::prelude::*;

fn oracle() -> Oracle {
    let mut o = Oracle::default();
    for v in 1..=5u64 {
        let mut p = dsvc_testkit::oracle::Plain::new();
        p.insert("T0".into(), Default::default());
        p.insert("T1".into(), Default::default());
        o.snapshots.insert(v, p);
        o.parents.insert(v, if v == 1 { vec![] } else { vec![v - 1] });
    }
    o
}

proptest! {
    #[test]
    fn print_then_parse_is_a_fixpoint(seed in any::<u64>()) {
        let o = oracle();
        let mut r = rng(seed);
        let text = render(&random_query(&mut r, &o));
        let q = parse(&text).unwrap();
        let printed = q.to_string();
        prop_assert_eq!(parse(&printed).unwrap(), q);
    }

    #[test]
    fn keywords_are_case_insensitive(seed in any::<u64>()) {
        let o = oracle();
        let mut r = rng(seed);
        let text = render(&random_query(&mut r, &o));
        let lowered: String = text
            .split('\'')
            .enumerate()
            .map(|(i, part)| if i % 2 == 0 { part.replace("SELECT", "select").replace("WHERE", "where").replace("FROM", "from") } else { part.to_string() })
            .collect::<Vec<_>>()
            .join("'");
        prop_assert_eq!(parse(&lowered).unwrap(), parse(&text).unwrap());
    }

    #[test]
    fn garbage_never_panics(text in "[ -~]{0,60}") {
        let _ = parse(&text);
    }
}
