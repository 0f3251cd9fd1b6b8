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

//! Random VQL queries with a naive reference evaluator.

use std::collections::{BTreeMap, BTreeSet};

use dsvc_core::{Value, VersionId};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::gen::ATTRS;
use crate::graphs;
use crate::oracle::{loose_cmp, Plain, Row};
use crate::scenario::Oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Op {
    const ALL: [Op; 6] = [Op::Eq, Op::Ne, Op::Lt, Op::Le, Op::Gt, Op::Ge];

    fn text(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
        }
    }

    fn holds(self, o: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Op::Eq => o == Equal,
            Op::Ne => o != Equal,
            Op::Lt => o == Less,
            Op::Le => o != Greater,
            Op::Gt => o == Greater,
            Op::Ge => o != Less,
        }
    }

    fn ints(self, a: i64, b: i64) -> bool {
        self.holds(a.cmp(&b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Col {
    Key,
    Attr(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    Cmp(Col, Op, Value),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Not(Box<Cond>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agg {
    Min,
    Max,
    Count,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Proj {
    Star,
    Cols(Vec<Col>),
    Aggs(Vec<(Agg, Col)>),
}

/// How a single-table query picks its version.
#[derive(Debug, Clone, PartialEq)]
pub enum VerSel {
    Head,
    Literal(VersionId),
    /// `(SELECT MIN|MAX(VNUM) FROM VERSIONS(t) WHERE k op DIFF_RECS(t, VNUM, other))`
    Pick { max: bool, op: Op, k: i64, other: VersionId },
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuerySpec {
    Select { proj: Proj, table: String, version: VerSel, cond: Option<Cond> },
    Exists { table: String, cond: Option<Cond>, negate: bool },
    DiffFilter { table: String, op: Op, k: i64, other: VersionId },
    DistanceFilter { table: String, op: Op, d: i64, other: VersionId, reversed: bool },
    Join { table: String, a: VersionId, b: VersionId, attr: &'static str, cond: Option<Cond> },
    PairAgg { table: String, max: bool, d: i64, k: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Rows { width: usize, rows: Vec<Vec<Value>> },
    Error,
}

const WORDS: [&str; 4] = ["red", "blue", "ink", "zzz"];

fn literal<R: Rng>(rng: &mut R) -> Value {
    match rng.gen_range(0..6) {
        0..=2 => Value::Int(rng.gen_range(-20..20)),
        3 => Value::Float(rng.gen_range(-40..40) as f64 / 4.0),
        _ => Value::Text(WORDS.choose(rng).unwrap().to_string()),
    }
}

fn col<R: Rng>(rng: &mut R) -> Col {
    if rng.gen_bool(0.1) {
        Col::Key
    } else {
        Col::Attr(ATTRS.choose(rng).unwrap())
    }
}

pub fn random_cond<R: Rng>(rng: &mut R, depth: usize, simple: bool) -> Cond {
    let roll = if depth == 0 { 0 } else { rng.gen_range(0..6) };
    match roll {
        0..=2 => {
            let c = col(rng);
            let v = match c {
                Col::Key => Value::Text(format!("k{}", rng.gen_range(0..40))),
                Col::Attr(_) => literal(rng),
            };
            Cond::Cmp(c, *Op::ALL.choose(rng).unwrap(), v)
        }
        3 | 4 if simple => Cond::And(
            Box::new(random_cond(rng, depth - 1, true)),
            Box::new(random_cond(rng, depth - 1, true)),
        ),
        3 => Cond::And(
            Box::new(random_cond(rng, depth - 1, false)),
            Box::new(random_cond(rng, depth - 1, false)),
        ),
        4 => Cond::Or(
            Box::new(random_cond(rng, depth - 1, false)),
            Box::new(random_cond(rng, depth - 1, false)),
        ),
        _ if simple => random_cond(rng, depth - 1, true),
        _ => Cond::Not(Box::new(random_cond(rng, depth - 1, false))),
    }
}

pub fn random_query<R: Rng>(rng: &mut R, oracle: &Oracle) -> QuerySpec {
    let versions: Vec<VersionId> = oracle.snapshots.keys().copied().collect();
    let table = if rng.gen_bool(0.7) { "T0" } else { "T1" }.to_string();
    let table = if oracle.snapshots.values().all(|p| p.contains_key(&table)) {
        table
    } else {
        "T0".to_string()
    };
    let v = |rng: &mut R| *versions.choose(rng).unwrap();
    let cond = |rng: &mut R| rng.gen_bool(0.8).then(|| random_cond(rng, 2, false));
    match rng.gen_range(0..10) {
        0..=2 => {
            let proj = match rng.gen_range(0..3) {
                0 => Proj::Star,
                1 => Proj::Cols((0..rng.gen_range(1..=3)).map(|_| col(rng)).collect()),
                _ => Proj::Aggs(
                    (0..rng.gen_range(1..=2))
                        .map(|_| (*[Agg::Min, Agg::Max, Agg::Count].choose(rng).unwrap(), col(rng)))
                        .collect(),
                ),
            };
            let version = match rng.gen_range(0..4) {
                0 => VerSel::Head,
                1 => VerSel::Pick {
                    max: rng.gen(),
                    op: *Op::ALL.choose(rng).unwrap(),
                    k: rng.gen_range(0..30),
                    other: v(rng),
                },
                _ => VerSel::Literal(v(rng)),
            };
            QuerySpec::Select { proj, table, version, cond: cond(rng) }
        }
        3..=4 => {
            let simple = rng.gen_bool(0.6);
            let mut cond = rng.gen_bool(0.9).then(|| random_cond(rng, 2, simple));
            if rng.gen_bool(0.5) {
                let key = Cond::Cmp(Col::Key, Op::Eq, Value::Text(format!("k{}", rng.gen_range(0..40))));
                cond = Some(match cond {
                    Some(c) => Cond::And(Box::new(key), Box::new(c)),
                    None => key,
                });
            }
            QuerySpec::Exists {
                table,
                cond,
                negate: rng.gen_bool(0.2),
            }
        }
        5 => QuerySpec::DiffFilter {
            table,
            op: *Op::ALL.choose(rng).unwrap(),
            k: rng.gen_range(0..40),
            other: v(rng),
        },
        6 => QuerySpec::DistanceFilter {
            table,
            op: *Op::ALL.choose(rng).unwrap(),
            d: rng.gen_range(-1..4),
            other: v(rng),
            reversed: rng.gen(),
        },
        7..=8 => QuerySpec::Join {
            table,
            a: v(rng),
            b: v(rng),
            attr: ATTRS.choose(rng).unwrap(),
            cond: cond(rng),
        },
        _ => QuerySpec::PairAgg {
            table,
            max: rng.gen(),
            d: rng.gen_range(1..3),
            k: rng.gen_range(0..20),
        },
    }
}

fn lit_text(v: &Value) -> String {
    match v {
        Value::Int(n) => n.to_string(),
        Value::Float(x) => format!("{x:?}"),
        Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        other => panic!("no literal form for {other:?}"),
    }
}

fn col_text(c: &Col, q: Option<&str>) -> String {
    let name = match c {
        Col::Key => "_key",
        Col::Attr(a) => a,
    };
    match q {
        Some(q) => format!("{q}.{name}"),
        None => name.to_string(),
    }
}

fn cond_text(c: &Cond, q: Option<&str>) -> String {
    match c {
        Cond::Cmp(col, op, v) => format!("{} {} {}", col_text(col, q), op.text(), lit_text(v)),
        Cond::And(a, b) => format!("({} AND {})", cond_text(a, q), cond_text(b, q)),
        Cond::Or(a, b) => format!("({} OR {})", cond_text(a, q), cond_text(b, q)),
        Cond::Not(a) => format!("NOT ({})", cond_text(a, q)),
    }
}

fn agg_text(a: Agg) -> &'static str {
    match a {
        Agg::Min => "MIN",
        Agg::Max => "MAX",
        Agg::Count => "COUNT",
    }
}

/// VQL text for a generated query.
pub fn render(q: &QuerySpec) -> String {
    let where_ = |c: &Option<Cond>, q: Option<&str>| match c {
        Some(c) => format!(" WHERE {}", cond_text(c, q)),
        None => String::new(),
    };
    match q {
        QuerySpec::Select { proj, table, version, cond } => {
            let items = match proj {
                Proj::Star => "*".to_string(),
                Proj::Cols(cs) => cs.iter().map(|c| col_text(c, None)).collect::<Vec<_>>().join(", "),
                Proj::Aggs(aggs) => aggs
                    .iter()
                    .map(|(a, c)| format!("{}({})", agg_text(*a), col_text(c, None)))
                    .collect::<Vec<_>>()
                    .join(", "),
            };
            let from = match version {
                VerSel::Head => table.clone(),
                VerSel::Literal(v) => format!("{table}(v{v})"),
                VerSel::Pick { max, op, k, other } => format!(
                    "{table}(SELECT {}(VNUM) FROM VERSIONS({table}) WHERE {k} {} DIFF_RECS({table}, VNUM, {other}))",
                    if *max { "MAX" } else { "MIN" },
                    op.text()
                ),
            };
            format!("SELECT {items} FROM {from}{}", where_(cond, None))
        }
        QuerySpec::Exists { table, cond, negate } => format!(
            "SELECT VNUM FROM VERSIONS({table}) WHERE {}EXISTS (SELECT * FROM {table}(VNUM){})",
            if *negate { "NOT " } else { "" },
            where_(cond, None)
        ),
        QuerySpec::DiffFilter { table, op, k, other } => format!(
            "SELECT VNUM FROM VERSIONS({table}) WHERE {k} {} DIFF_RECS({table}, VNUM, v{other})",
            op.text()
        ),
        QuerySpec::DistanceFilter { table, op, d, other, reversed } => {
            let args = if *reversed {
                format!("VNUM, {other}")
            } else {
                format!("{other}, VNUM")
            };
            format!(
                "SELECT VNUM FROM VERSIONS({table}) WHERE DISTANCE({table}, {args}) {} {}",
                op.text(),
                d
            )
        }
        QuerySpec::Join { table, a, b, attr, cond } => {
            let extra = match cond {
                Some(c) => format!(" AND {}", cond_text(c, Some("x"))),
                None => String::new(),
            };
            format!(
                "SELECT x._key, x.{attr}, y.{attr} FROM {table}(v{a}) x, {table}(v{b}) y WHERE x._key = y._key{extra}"
            )
        }
        QuerySpec::PairAgg { table, max, d, k } => format!(
            "SELECT {}(V1.VNUM) FROM VERSIONS({table}) V1, VERSIONS({table}) V2 \
             WHERE DISTANCE({table}, V1.VNUM, V2.VNUM) = {d} AND DIFF_RECS({table}, V1.VNUM, V2.VNUM) > {k}",
            if *max { "MAX" } else { "MIN" }
        ),
    }
}

fn col_value(c: &Col, key: &str, row: &Row) -> Option<Value> {
    match c {
        Col::Key => Some(Value::Text(key.to_string())),
        Col::Attr(a) => row.get(*a).cloned(),
    }
}

fn holds(c: &Cond, key: &str, row: &Row) -> bool {
    match c {
        Cond::Cmp(col, op, v) => col_value(col, key, row)
            .and_then(|x| loose_cmp(&x, v))
            .is_some_and(|o| op.holds(o)),
        Cond::And(a, b) => holds(a, key, row) && holds(b, key, row),
        Cond::Or(a, b) => holds(a, key, row) || holds(b, key, row),
        Cond::Not(a) => !holds(a, key, row),
    }
}

fn passes(c: &Option<Cond>, key: &str, row: &Row) -> bool {
    c.as_ref().is_none_or(|c| holds(c, key, row))
}

fn table_diff(a: &Plain, b: &Plain, t: &str) -> i64 {
    let empty = BTreeMap::new();
    let (ta, tb) = (a.get(t).unwrap_or(&empty), b.get(t).unwrap_or(&empty));
    let keys: BTreeSet<&String> = ta.keys().chain(tb.keys()).collect();
    keys.into_iter().filter(|k| ta.get(*k) != tb.get(*k)).count() as i64
}

/// Total order on values used for sorting rows and MIN/MAX.
fn order(a: &Value, b: &Value) -> std::cmp::Ordering {
    a.cmp(b)
}

fn versions_with(o: &Oracle, t: &str) -> Vec<VersionId> {
    o.snapshots
        .iter()
        .filter(|(_, p)| p.contains_key(t))
        .map(|(v, _)| *v)
        .collect()
}

fn int(v: VersionId) -> Value {
    Value::Int(v as i64)
}

/// Brute-force result from full snapshots.
pub fn expected(q: &QuerySpec, o: &Oracle, head: VersionId) -> Expected {
    let mut rows: Vec<Vec<Value>> = Vec::new();
    let width;
    match q {
        QuerySpec::Select { proj, table, version, cond } => {
            let v = match version {
                VerSel::Head => head,
                VerSel::Literal(v) => *v,
                VerSel::Pick { max, op, k, other } => {
                    let hits: Vec<VersionId> = versions_with(o, table)
                        .into_iter()
                        .filter(|&w| {
                            op.ints(*k, table_diff(&o.snapshots[&w], &o.snapshots[other], table))
                        })
                        .collect();
                    let pick = if *max { hits.iter().max() } else { hits.iter().min() };
                    match pick {
                        Some(v) => *v,
                        None => return Expected::Error,
                    }
                }
            };
            let Some(t) = o.snapshots[&v].get(table) else {
                return Expected::Error;
            };
            let matched: Vec<(&String, &Row)> = t.iter().filter(|(k, r)| passes(cond, k, r)).collect();
            match proj {
                Proj::Star => {
                    let attrs: BTreeSet<&String> = t.values().flat_map(|r| r.keys()).collect();
                    width = 1 + attrs.len();
                    for (k, r) in matched {
                        let mut row = vec![Value::Text(k.clone())];
                        row.extend(attrs.iter().map(|a| r.get(*a).cloned().unwrap_or(Value::Null)));
                        rows.push(row);
                    }
                }
                Proj::Cols(cs) => {
                    width = cs.len();
                    for (k, r) in matched {
                        rows.push(cs.iter().map(|c| col_value(c, k, r).unwrap_or(Value::Null)).collect());
                    }
                }
                Proj::Aggs(aggs) => {
                    width = aggs.len();
                    let mut row = Vec::new();
                    for (agg, c) in aggs {
                        let vals: Vec<Value> = matched
                            .iter()
                            .filter_map(|(k, r)| col_value(c, k, r))
                            .filter(|v| *v != Value::Null)
                            .collect();
                        row.push(match agg {
                            Agg::Count => Value::Int(vals.len() as i64),
                            Agg::Min => vals.into_iter().min_by(order).unwrap_or(Value::Null),
                            Agg::Max => vals.into_iter().max_by(order).unwrap_or(Value::Null),
                        });
                    }
                    rows.push(row);
                }
            }
        }
        QuerySpec::Exists { table, cond, negate } => {
            width = 1;
            for v in versions_with(o, table) {
                let any = o.snapshots[&v][table].iter().any(|(k, r)| passes(cond, k, r));
                if any != *negate {
                    rows.push(vec![int(v)]);
                }
            }
        }
        QuerySpec::DiffFilter { table, op, k, other } => {
            width = 1;
            if !o.snapshots[other].contains_key(table) {
                return Expected::Error;
            }
            for v in versions_with(o, table) {
                if op.ints(*k, table_diff(&o.snapshots[&v], &o.snapshots[other], table)) {
                    rows.push(vec![int(v)]);
                }
            }
        }
        QuerySpec::DistanceFilter { table, op, d, other, reversed } => {
            width = 1;
            if !o.snapshots[other].contains_key(table) {
                return Expected::Error;
            }
            for v in versions_with(o, table) {
                let dist = if *reversed {
                    graphs::bfs_distance(&o.parents, v, *other)
                } else {
                    graphs::bfs_distance(&o.parents, *other, v)
                };
                if op.ints(dist, *d) {
                    rows.push(vec![int(v)]);
                }
            }
        }
        QuerySpec::Join { table, a, b, attr, cond } => {
            width = 3;
            let (Some(ta), Some(tb)) = (o.snapshots[a].get(table), o.snapshots[b].get(table)) else {
                return Expected::Error;
            };
            for (k, ra) in ta {
                if let Some(rb) = tb.get(k) {
                    if passes(cond, k, ra) {
                        rows.push(vec![
                            Value::Text(k.clone()),
                            ra.get(*attr).cloned().unwrap_or(Value::Null),
                            rb.get(*attr).cloned().unwrap_or(Value::Null),
                        ]);
                    }
                }
            }
        }
        QuerySpec::PairAgg { table, max, d, k } => {
            width = 1;
            let vs = versions_with(o, table);
            let mut hits = Vec::new();
            for &x in &vs {
                for &y in &vs {
                    if graphs::bfs_distance(&o.parents, x, y) == *d
                        && table_diff(&o.snapshots[&x], &o.snapshots[&y], table) > *k
                    {
                        hits.push(x);
                    }
                }
            }
            let pick = if *max { hits.iter().max() } else { hits.iter().min() };
            rows.push(vec![pick.map(|v| int(*v)).unwrap_or(Value::Null)]);
        }
    }
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| order(x, y))
            .find(|o| o.is_ne())
            .unwrap_or(a.len().cmp(&b.len()))
    });
    Expected::Rows { width, rows }
}

/// A random query rendered to text, with its expected result.
pub fn sample<R: Rng>(rng: &mut R, o: &Oracle, head: VersionId) -> (QuerySpec, String, Expected) {
    let q = random_query(rng, o);
    let text = render(&q);
    let e = expected(&q, o, head);
    (q, text, e)
}
