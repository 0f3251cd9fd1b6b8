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

//! Nested-loop evaluation over materialized versions, with record-first
//! routing for correlated existence probes.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use dsvc_core::bitmap::VersionBitmap;
use dsvc_core::predicate::{compare, Column, Comparison, Predicate};
use dsvc_core::repo::Config;
use dsvc_core::store::record_first::RecordFirstIndex;
use dsvc_core::{diff_recs_table, Dataset, Record, Repository, Value, VersionId};

use crate::ast::*;
use crate::error::{Result, VqlError};

/// Pseudo-column holding the record key.
pub const KEY_COLUMN: &str = "_key";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    /// Serve simple correlated `EXISTS` probes from the record-first index.
    pub record_first: bool,
}

impl Options {
    pub fn from_config(config: &Config) -> Self {
        Options {
            record_first: config.record_first_routing,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// Scan counters, for checking which representation answered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanStats {
    pub record_first_probes: u64,
    pub version_first_scans: u64,
}

pub fn evaluate(repo: &Repository, query: &Query) -> Result<ResultSet> {
    evaluate_with(repo, query, Options::from_config(repo.config()))
}

pub fn evaluate_with(repo: &Repository, query: &Query, options: Options) -> Result<ResultSet> {
    Ok(evaluate_with_stats(repo, query, options)?.0)
}

pub fn evaluate_with_stats(
    repo: &Repository,
    query: &Query,
    options: Options,
) -> Result<(ResultSet, ScanStats)> {
    check(query, &mut Vec::new())?;
    let engine = Engine::new(repo, options);
    let rs = engine.eval(query, &mut Vec::new())?;
    let stats = *engine.stats.borrow();
    Ok((rs, stats))
}

/// Parses and evaluates `text`.
pub fn run(repo: &Repository, text: &str) -> Result<ResultSet> {
    evaluate(repo, &crate::parse(text)?)
}

enum Target {
    Column(String),
    Vnum,
}

fn locate<'a, I>(scopes: I, qualifier: &Option<Qualifier>, target: Target) -> Result<(usize, usize)>
where
    I: DoubleEndedIterator<Item = &'a [FromItem]> + ExactSizeIterator,
{
    let describe = || match (&target, qualifier) {
        (Target::Column(c), Some(q)) => format!("{q}.{c}"),
        (Target::Column(c), None) => c.clone(),
        (Target::Vnum, Some(q)) => format!("{q}.VNUM"),
        (Target::Vnum, None) => "VNUM".to_string(),
    };
    for (depth, items) in scopes.enumerate().rev() {
        let hits: Vec<usize> = items
            .iter()
            .enumerate()
            .filter(|(_, it)| match (qualifier, &target) {
                (Some(q), _) => it.answers_to(q),
                (None, Target::Vnum) => matches!(it, FromItem::Versions { .. }),
                (None, Target::Column(_)) => matches!(it, FromItem::TableAt { .. }),
            })
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [] => continue,
            [i] => {
                if let (Target::Column(_), FromItem::Versions { .. }) = (&target, &items[*i]) {
                    return Err(VqlError::TypeError(format!(
                        "`{}` names a VERSIONS scan, which only has VNUM",
                        describe()
                    )));
                }
                return Ok((depth, *i));
            }
            _ => return Err(VqlError::Unresolved(format!("{} is ambiguous", describe()))),
        }
    }
    Err(VqlError::Unresolved(describe()))
}

fn check_ref(scopes: &[&[FromItem]], q: &Option<Qualifier>, target: Target) -> Result<()> {
    locate(scopes.iter().copied(), q, target).map(|_| ())
}

fn check_vterm(scopes: &[&[FromItem]], t: &VTerm) -> Result<()> {
    match t {
        VTerm::Literal(_) => Ok(()),
        VTerm::Vnum(q) => check_ref(scopes, q, Target::Vnum),
    }
}

/// Static name resolution and shape checks.
fn check<'q>(q: &'q Query, scopes: &mut Vec<&'q [FromItem]>) -> Result<()> {
    for item in &q.from {
        if let FromItem::TableAt { version, .. } = item {
            match version {
                VersionExpr::Vnum(qual) => check_ref(scopes, qual, Target::Vnum)?,
                VersionExpr::Subquery(sub) => check(sub, scopes)?,
                VersionExpr::Head | VersionExpr::Literal(_) => {}
            }
        }
    }
    scopes.push(&q.from);
    let result = check_body(q, scopes);
    scopes.pop();
    result
}

fn check_body<'q>(q: &'q Query, scopes: &mut Vec<&'q [FromItem]>) -> Result<()> {
    if let Projection::Items(items) = &q.projection {
        let aggs = items.iter().filter(|i| matches!(i, Item::Agg(..))).count();
        if aggs > 0 && aggs < items.len() {
            return Err(VqlError::TypeError(
                "aggregates cannot be mixed with plain columns".into(),
            ));
        }
        for it in items {
            match it {
                Item::Column(c) | Item::Agg(_, AggArg::Column(c)) => {
                    check_ref(scopes, &c.qualifier, Target::Column(c.name.clone()))?
                }
                Item::Vnum(qual) | Item::Agg(_, AggArg::Vnum(qual)) => {
                    check_ref(scopes, qual, Target::Vnum)?
                }
            }
        }
    }
    if let Some(e) = &q.filter {
        check_expr(e, scopes)?;
    }
    Ok(())
}

fn check_expr<'q>(e: &'q Expr, scopes: &mut Vec<&'q [FromItem]>) -> Result<()> {
    match e {
        Expr::And(a, b) | Expr::Or(a, b) => {
            check_expr(a, scopes)?;
            check_expr(b, scopes)
        }
        Expr::Not(a) => check_expr(a, scopes),
        Expr::Exists(sub) => check(sub, scopes),
        Expr::Cmp(l, _, r) => {
            for o in [l, r] {
                match o {
                    Operand::Literal(_) => {}
                    Operand::Column(c) => {
                        check_ref(scopes, &c.qualifier, Target::Column(c.name.clone()))?
                    }
                    Operand::Vnum(qual) => check_ref(scopes, qual, Target::Vnum)?,
                    Operand::Call(_, _, a, b) => {
                        check_vterm(scopes, a)?;
                        check_vterm(scopes, b)?;
                    }
                }
            }
            Ok(())
        }
    }
}

/// Comparisons of one scan's columns against literals joined by AND.
fn conjunction(e: &Expr, ours: &dyn Fn(&Qualifier) -> bool) -> Option<Vec<Comparison>> {
    fn collect(e: &Expr, ours: &dyn Fn(&Qualifier) -> bool, out: &mut Vec<Comparison>) -> bool {
        match e {
            Expr::And(a, b) => collect(a, ours, out) && collect(b, ours, out),
            Expr::Cmp(l, op, r) => {
                let (c, op, v) = match (l, r) {
                    (Operand::Column(c), Operand::Literal(v)) => (c, *op, v),
                    (Operand::Literal(v), Operand::Column(c)) => (c, op.flip(), v),
                    _ => return false,
                };
                if c.qualifier.as_ref().is_some_and(|q| !ours(q)) {
                    return false;
                }
                let column = if c.name == KEY_COLUMN {
                    Column::Key
                } else {
                    Column::Attr(c.name.clone())
                };
                out.push(Comparison {
                    column,
                    op,
                    value: v.clone(),
                });
                true
            }
            _ => false,
        }
    }
    let mut out = Vec::new();
    collect(e, ours, &mut out).then_some(out)
}

/// Parses `a > 3 AND name = 'x'` into a row predicate.
pub fn parse_predicate(text: &str) -> Result<Predicate> {
    let e = crate::parser::parse_condition(text)?;
    conjunction(&e, &|_| false).map(Predicate::new).ok_or_else(|| {
        VqlError::TypeError(
            "expected unqualified column comparisons with literals joined by AND".into(),
        )
    })
}

/// `EXISTS (SELECT .. FROM R(VNUM) WHERE col op literal AND ..)`: the table,
/// the version reference and the equivalent predicate.
pub(crate) fn routable(q: &Query) -> Option<(&str, &Option<Qualifier>, Predicate)> {
    let [item @ FromItem::TableAt {
        name,
        version: VersionExpr::Vnum(vq),
        ..
    }] = q.from.as_slice()
    else {
        return None;
    };
    let clauses = match &q.filter {
        Some(e) => conjunction(e, &|qual| item.answers_to(qual))?,
        None => Vec::new(),
    };
    Some((name.as_str(), vq, Predicate::new(clauses)))
}

#[derive(Clone)]
struct Binding {
    version: VersionId,
    record: Option<Arc<Record>>,
}

struct Frame<'q> {
    items: &'q [FromItem],
    bound: Vec<Binding>,
}

enum Source {
    Rows {
        version: VersionId,
        records: Vec<Arc<Record>>,
    },
    Versions(Vec<VersionId>),
}

impl Source {
    fn len(&self) -> usize {
        match self {
            Source::Rows { records, .. } => records.len(),
            Source::Versions(vs) => vs.len(),
        }
    }

    fn binding(&self, i: usize) -> Binding {
        match self {
            Source::Rows { version, records } => Binding {
                version: *version,
                record: Some(records[i].clone()),
            },
            Source::Versions(vs) => Binding {
                version: vs[i],
                record: None,
            },
        }
    }
}

type Sink<'s, 'q> = dyn FnMut(&[Frame<'q>]) -> Result<bool> + 's;

enum Acc {
    Count(i64),
    Min(Option<Value>),
    Max(Option<Value>),
}

struct Engine<'r> {
    repo: &'r Repository,
    options: Options,
    datasets: RefCell<HashMap<VersionId, Arc<Dataset>>>,
    diffs: RefCell<HashMap<(String, VersionId, VersionId), u64>>,
    versions_of: RefCell<HashMap<String, Vec<VersionId>>>,
    routed: RefCell<HashMap<*const Query, VersionBitmap>>,
    index: RefCell<Option<Arc<RecordFirstIndex>>>,
    stats: RefCell<ScanStats>,
}

impl<'r> Engine<'r> {
    fn new(repo: &'r Repository, options: Options) -> Self {
        Engine {
            repo,
            options,
            datasets: RefCell::default(),
            diffs: RefCell::default(),
            versions_of: RefCell::default(),
            routed: RefCell::default(),
            index: RefCell::default(),
            stats: RefCell::default(),
        }
    }

    fn index(&self) -> Result<Arc<RecordFirstIndex>> {
        if let Some(ix) = &*self.index.borrow() {
            return Ok(ix.clone());
        }
        let ix = self.repo.record_index()?;
        *self.index.borrow_mut() = Some(ix.clone());
        Ok(ix)
    }

    fn known(&self, v: VersionId) -> Result<()> {
        if self.repo.graph().contains(v) {
            Ok(())
        } else {
            Err(VqlError::UnknownVersion(format!("v{v}")))
        }
    }

    fn dataset(&self, v: VersionId) -> Result<Arc<Dataset>> {
        if let Some(ds) = self.datasets.borrow().get(&v) {
            return Ok(ds.clone());
        }
        self.known(v)?;
        let ds = self.repo.materialize(v)?;
        self.datasets.borrow_mut().insert(v, ds.clone());
        Ok(ds)
    }

    fn versions_with(&self, table: &str) -> Result<Vec<VersionId>> {
        if let Some(vs) = self.versions_of.borrow().get(table) {
            return Ok(vs.clone());
        }
        let vs: Vec<VersionId> = if self.options.record_first {
            self.index()?.versions_with_table(table).iter().collect()
        } else {
            let mut out = Vec::new();
            for v in self.repo.graph().ids() {
                if self.dataset(v)?.has_table(table) {
                    out.push(v);
                }
            }
            out
        };
        if vs.is_empty() {
            return Err(VqlError::UnknownTable(table.to_string()));
        }
        self.versions_of
            .borrow_mut()
            .insert(table.to_string(), vs.clone());
        Ok(vs)
    }

    fn head(&self) -> Result<VersionId> {
        let branch = &self.repo.config().default_branch;
        self.repo
            .graph()
            .head(branch)?
            .ok_or_else(|| VqlError::UnknownVersion(format!("{branch} has no versions")))
    }

    fn vnum(&self, frames: &[Frame<'_>], q: &Option<Qualifier>) -> Result<VersionId> {
        let (d, i) = locate(frames.iter().map(|f| f.items), q, Target::Vnum)?;
        Ok(frames[d].bound[i].version)
    }

    fn column(&self, frames: &[Frame<'_>], c: &ColumnRef) -> Result<Option<Value>> {
        let (d, i) = locate(
            frames.iter().map(|f| f.items),
            &c.qualifier,
            Target::Column(c.name.clone()),
        )?;
        let rec = frames[d].bound[i]
            .record
            .as_ref()
            .expect("table scans bind records");
        Ok(if c.name == KEY_COLUMN {
            Some(Value::Text(rec.key().to_string()))
        } else {
            rec.get(&c.name).cloned()
        })
    }

    fn vterm(&self, frames: &[Frame<'_>], t: &VTerm) -> Result<VersionId> {
        match t {
            VTerm::Literal(v) => Ok(*v),
            VTerm::Vnum(q) => self.vnum(frames, q),
        }
    }

    fn version<'q>(&self, e: &'q VersionExpr, frames: &mut Vec<Frame<'q>>) -> Result<VersionId> {
        let v = match e {
            VersionExpr::Head => self.head()?,
            VersionExpr::Literal(v) => *v,
            VersionExpr::Vnum(q) => self.vnum(frames, q)?,
            VersionExpr::Subquery(sub) => {
                let rs = self.eval(sub, frames)?;
                match (rs.rows.as_slice(), rs.columns.len()) {
                    ([row], 1) => match row[0] {
                        Value::Int(n) if n >= 0 => n as VersionId,
                        ref other => {
                            return Err(VqlError::NonScalarVersionSubquery(format!(
                                "returned {other:?}"
                            )))
                        }
                    },
                    (rows, cols) => {
                        return Err(VqlError::NonScalarVersionSubquery(format!(
                            "returned {} rows of {cols} columns",
                            rows.len()
                        )))
                    }
                }
            }
        };
        self.known(v)?;
        Ok(v)
    }

    fn source<'q>(&self, item: &'q FromItem, frames: &mut Vec<Frame<'q>>) -> Result<Source> {
        match item {
            FromItem::TableAt { name, version, .. } => {
                let v = self.version(version, frames)?;
                let ds = self.dataset(v)?;
                let table = ds
                    .table(name)
                    .ok_or_else(|| VqlError::UnknownTable(format!("{name} at v{v}")))?;
                self.stats.borrow_mut().version_first_scans += 1;
                Ok(Source::Rows {
                    version: v,
                    records: table.records().cloned().collect(),
                })
            }
            FromItem::Versions { name, .. } => Ok(Source::Versions(self.versions_with(name)?)),
        }
    }

    fn sources<'q>(&self, q: &'q Query, frames: &mut Vec<Frame<'q>>) -> Result<Vec<Source>> {
        q.from.iter().map(|it| self.source(it, frames)).collect()
    }

    /// Calls `sink` for every FROM combination passing the filter until it returns false.
    fn iterate<'q>(
        &self,
        q: &'q Query,
        sources: &[Source],
        frames: &mut Vec<Frame<'q>>,
        sink: &mut Sink<'_, 'q>,
    ) -> Result<()> {
        if sources.iter().any(|s| s.len() == 0) {
            return Ok(());
        }
        let mut idx = vec![0usize; sources.len()];
        frames.push(Frame {
            items: &q.from,
            bound: sources.iter().map(|s| s.binding(0)).collect(),
        });
        let result = (|| -> Result<()> {
            loop {
                let pass = match &q.filter {
                    Some(e) => self.test(e, frames)?,
                    None => true,
                };
                if pass && !sink(frames)? {
                    return Ok(());
                }
                let mut k = sources.len();
                loop {
                    if k == 0 {
                        return Ok(());
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < sources[k].len() {
                        break;
                    }
                    idx[k] = 0;
                }
                let frame = frames.last_mut().expect("pushed above");
                for (j, s) in sources.iter().enumerate().skip(k) {
                    frame.bound[j] = s.binding(idx[j]);
                }
            }
        })();
        frames.pop();
        result
    }

    fn eval<'q>(&self, q: &'q Query, frames: &mut Vec<Frame<'q>>) -> Result<ResultSet> {
        let sources = self.sources(q, frames)?;
        match &q.projection {
            Projection::Star => {
                let mut columns = Vec::new();
                let mut layout: Vec<Vec<String>> = Vec::new();
                for (item, src) in q.from.iter().zip(&sources) {
                    let label = item.label();
                    match src {
                        Source::Rows { records, .. } => {
                            let attrs: BTreeSet<&String> =
                                records.iter().flat_map(|r| r.attrs().keys()).collect();
                            columns.push(format!("{label}.{KEY_COLUMN}"));
                            columns.extend(attrs.iter().map(|a| format!("{label}.{a}")));
                            layout.push(attrs.into_iter().cloned().collect());
                        }
                        Source::Versions(_) => {
                            columns.push(format!("{label}.VNUM"));
                            layout.push(Vec::new());
                        }
                    }
                }
                let mut rows = Vec::new();
                self.iterate(q, &sources, frames, &mut |frames| {
                    let frame = frames.last().expect("current frame");
                    let mut row = Vec::with_capacity(columns.len());
                    for (b, attrs) in frame.bound.iter().zip(&layout) {
                        match &b.record {
                            Some(r) => {
                                row.push(Value::Text(r.key().to_string()));
                                row.extend(
                                    attrs.iter().map(|a| r.get(a).cloned().unwrap_or(Value::Null)),
                                );
                            }
                            None => row.push(Value::Int(b.version as i64)),
                        }
                    }
                    rows.push(row);
                    Ok(true)
                })?;
                rows.sort();
                Ok(ResultSet { columns, rows })
            }
            Projection::Items(items) => {
                let columns = items.iter().map(|i| i.to_string()).collect();
                if items.iter().any(|i| matches!(i, Item::Agg(..))) {
                    let mut accs: Vec<Acc> = items
                        .iter()
                        .map(|i| match i {
                            Item::Agg(AggFn::Count, _) => Acc::Count(0),
                            Item::Agg(AggFn::Min, _) => Acc::Min(None),
                            _ => Acc::Max(None),
                        })
                        .collect();
                    self.iterate(q, &sources, frames, &mut |frames| {
                        for (item, acc) in items.iter().zip(accs.iter_mut()) {
                            let v = match item {
                                Item::Agg(_, AggArg::Column(c)) => self.column(frames, c)?,
                                Item::Agg(_, AggArg::Vnum(qual)) => {
                                    Some(Value::Int(self.vnum(frames, qual)? as i64))
                                }
                                _ => unreachable!("checked statically"),
                            };
                            let Some(v) = v.filter(|v| *v != Value::Null) else {
                                continue;
                            };
                            match acc {
                                Acc::Count(n) => *n += 1,
                                Acc::Min(m) => {
                                    if m.as_ref().is_none_or(|m| v < *m) {
                                        *m = Some(v);
                                    }
                                }
                                Acc::Max(m) => {
                                    if m.as_ref().is_none_or(|m| v > *m) {
                                        *m = Some(v);
                                    }
                                }
                            }
                        }
                        Ok(true)
                    })?;
                    let row = accs
                        .into_iter()
                        .map(|a| match a {
                            Acc::Count(n) => Value::Int(n),
                            Acc::Min(m) | Acc::Max(m) => m.unwrap_or(Value::Null),
                        })
                        .collect();
                    return Ok(ResultSet {
                        columns,
                        rows: vec![row],
                    });
                }
                let mut rows = Vec::new();
                self.iterate(q, &sources, frames, &mut |frames| {
                    let mut row = Vec::with_capacity(items.len());
                    for item in items {
                        row.push(match item {
                            Item::Column(c) => self.column(frames, c)?.unwrap_or(Value::Null),
                            Item::Vnum(qual) => Value::Int(self.vnum(frames, qual)? as i64),
                            Item::Agg(..) => unreachable!("handled above"),
                        });
                    }
                    rows.push(row);
                    Ok(true)
                })?;
                rows.sort();
                Ok(ResultSet { columns, rows })
            }
        }
    }

    fn exists<'q>(&self, sub: &'q Query, frames: &mut Vec<Frame<'q>>) -> Result<bool> {
        if self.options.record_first {
            if let Some((table, vq, pred)) = routable(sub) {
                let v = self.vnum(frames, vq)?;
                let index = self.index()?;
                if !index.versions_with_table(table).contains(v) {
                    return Err(VqlError::UnknownTable(format!("{table} at v{v}")));
                }
                self.stats.borrow_mut().record_first_probes += 1;
                let key = sub as *const Query;
                let cached = self.routed.borrow().get(&key).map(|bm| bm.contains(v));
                if let Some(hit) = cached {
                    return Ok(hit);
                }
                let bm = index.versions_matching(table, &pred);
                let hit = bm.contains(v);
                self.routed.borrow_mut().insert(key, bm);
                return Ok(hit);
            }
        }
        let sources = self.sources(sub, frames)?;
        let mut found = false;
        self.iterate(sub, &sources, frames, &mut |_| {
            found = true;
            Ok(false)
        })?;
        Ok(found)
    }

    fn operand(&self, o: &Operand, frames: &[Frame<'_>]) -> Result<Option<Value>> {
        Ok(match o {
            Operand::Literal(v) => Some(v.clone()),
            Operand::Column(c) => self.column(frames, c)?,
            Operand::Vnum(q) => Some(Value::Int(self.vnum(frames, q)? as i64)),
            Operand::Call(func, table, a, b) => {
                let (va, vb) = (self.vterm(frames, a)?, self.vterm(frames, b)?);
                let (da, db) = (self.dataset(va)?, self.dataset(vb)?);
                for (v, d) in [(va, &da), (vb, &db)] {
                    if !d.has_table(table) {
                        return Err(VqlError::UnknownTable(format!("{table} at v{v}")));
                    }
                }
                Some(Value::Int(match func {
                    Func::Distance => self.repo.distance(va, vb)?,
                    Func::DiffRecs => {
                        let key = (table.clone(), va.min(vb), va.max(vb));
                        let cached = self.diffs.borrow().get(&key).copied();
                        let n = match cached {
                            Some(n) => n,
                            None => {
                                let n = diff_recs_table(&da, &db, table);
                                self.diffs.borrow_mut().insert(key, n);
                                n
                            }
                        };
                        n as i64
                    }
                }))
            }
        })
    }

    fn test<'q>(&self, e: &'q Expr, frames: &mut Vec<Frame<'q>>) -> Result<bool> {
        Ok(match e {
            Expr::And(a, b) => self.test(a, frames)? && self.test(b, frames)?,
            Expr::Or(a, b) => self.test(a, frames)? || self.test(b, frames)?,
            Expr::Not(a) => !self.test(a, frames)?,
            Expr::Exists(sub) => self.exists(sub, frames)?,
            Expr::Cmp(l, op, r) => {
                match (self.operand(l, frames)?, self.operand(r, frames)?) {
                    (Some(x), Some(y)) => compare(&x, *op, &y),
                    _ => false,
                }
            }
        })
    }
}

/// Checks names and shapes without touching data.
pub fn validate(query: &Query) -> Result<()> {
    check(query, &mut Vec::new())
}
