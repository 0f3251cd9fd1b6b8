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

//! Random records, datasets and edit scripts.

use std::collections::BTreeMap;

use dsvc_core::predicate::{CmpOp, Comparison, Predicate};
use dsvc_core::repo::Edit;
use dsvc_core::{Dataset, Record, Table, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::oracle::Plain;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const ATTRS: [&str; 6] = ["a0", "a1", "a2", "a3", "a4", "a5"];
const WORDS: [&str; 6] = ["red", "green", "blue", "amber", "cyan", "ink"];

pub fn random_value<R: Rng>(rng: &mut R) -> Value {
    match rng.gen_range(0..10) {
        0..=3 => Value::Int(rng.gen_range(-20..20)),
        4..=5 => Value::Text(WORDS.choose(rng).unwrap().to_string()),
        6 => Value::Float(rng.gen_range(-40..40) as f64 / 4.0),
        7 => Value::Bool(rng.gen()),
        8 => Value::Null,
        _ => Value::Int(rng.gen_range(0..1000)),
    }
}

pub fn random_attrs<R: Rng>(rng: &mut R) -> BTreeMap<String, Value> {
    let mut attrs = BTreeMap::new();
    for a in ATTRS {
        if rng.gen_bool(0.7) {
            attrs.insert(a.to_string(), random_value(rng));
        }
    }
    attrs
}

pub fn random_record<R: Rng>(rng: &mut R, key: &str) -> Record {
    Record::new(key, random_attrs(rng)).expect("generated records are valid")
}

/// A dataset with `tables` tables (`T0`, `T1`, ..) sharing `records` rows.
pub fn random_dataset<R: Rng>(rng: &mut R, tables: usize, records: usize) -> Dataset {
    let mut ds = Dataset::new();
    for t in 0..tables.max(1) {
        let mut table = Table::new(format!("T{t}")).unwrap();
        let n = if t == 0 { records } else { records / 3 };
        for i in 0..n {
            table.insert(random_record(rng, &format!("k{i}"))).unwrap();
        }
        ds.add_table(table).unwrap();
    }
    ds
}

/// A random comparison conjunction over generated attributes.
pub fn random_predicate<R: Rng>(rng: &mut R) -> Predicate {
    let ops = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
    let n = rng.gen_range(1..=2);
    Predicate::new(
        (0..n)
            .map(|_| Comparison {
                column: dsvc_core::predicate::Column::Attr(ATTRS.choose(rng).unwrap().to_string()),
                op: *ops.choose(rng).unwrap(),
                value: match rng.gen_range(0..3) {
                    0 => Value::Text(WORDS.choose(rng).unwrap().to_string()),
                    _ => Value::Int(rng.gen_range(-20..20)),
                },
            })
            .collect(),
    )
}

/// `n` row edits valid against `state`; `state` is advanced as edits are drawn.
pub fn random_edits<R: Rng>(rng: &mut R, state: &mut Plain, n: usize, allow_where: bool) -> Vec<Edit> {
    let mut out = Vec::new();
    let tables: Vec<String> = state.keys().cloned().collect();
    if tables.is_empty() {
        return out;
    }
    while out.len() < n {
        let table = tables.choose(rng).unwrap().clone();
        let keys: Vec<String> = state[&table].keys().cloned().collect();
        let roll = rng.gen_range(0..100);
        let edit = if keys.is_empty() || roll < 30 {
            let key = format!("n{:x}", rng.gen::<u32>());
            if state[&table].contains_key(&key) {
                continue;
            }
            Edit::Insert {
                table,
                record: random_record(rng, &key),
            }
        } else if roll < 55 {
            Edit::Delete {
                table,
                key: keys.choose(rng).unwrap().clone(),
            }
        } else if roll < 97 || !allow_where {
            let mut set = BTreeMap::new();
            for _ in 0..rng.gen_range(1..=2) {
                set.insert(ATTRS.choose(rng).unwrap().to_string(), random_value(rng));
            }
            let mut unset = Vec::new();
            if rng.gen_bool(0.2) {
                let a = ATTRS.choose(rng).unwrap().to_string();
                if !set.contains_key(&a) {
                    unset.push(a);
                }
            }
            Edit::Update {
                table,
                key: keys.choose(rng).unwrap().clone(),
                set,
                unset,
            }
        } else {
            let mut set = BTreeMap::new();
            set.insert(ATTRS.choose(rng).unwrap().to_string(), random_value(rng));
            Edit::UpdateWhere {
                table,
                predicate: random_predicate(rng),
                set,
            }
        };
        assert!(crate::oracle::apply_edit(state, &edit));
        out.push(edit);
    }
    out
}
