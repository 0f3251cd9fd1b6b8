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

//! Query syntax tree. `Display` prints text that parses back to an equal tree.

use std::fmt;

use dsvc_core::predicate::CmpOp;
use dsvc_core::{Value, VersionId};

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub projection: Projection,
    pub from: Vec<FromItem>,
    pub filter: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Star,
    Items(Vec<Item>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Column(ColumnRef),
    Vnum(Option<Qualifier>),
    Agg(AggFn, AggArg),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFn {
    Min,
    Max,
    Count,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggArg {
    Column(ColumnRef),
    Vnum(Option<Qualifier>),
}

/// `R`, an alias, or `R(v12)` naming the scan of `R` at a literal version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Qualifier {
    Name(String),
    At(String, VersionId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRef {
    pub qualifier: Option<Qualifier>,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FromItem {
    TableAt {
        name: String,
        version: VersionExpr,
        alias: Option<String>,
    },
    Versions {
        name: String,
        alias: Option<String>,
    },
}

impl FromItem {
    pub fn table(&self) -> &str {
        match self {
            FromItem::TableAt { name, .. } | FromItem::Versions { name, .. } => name,
        }
    }

    pub fn alias(&self) -> Option<&str> {
        match self {
            FromItem::TableAt { alias, .. } | FromItem::Versions { alias, .. } => alias.as_deref(),
        }
    }

    /// Name used to prefix output columns.
    pub fn label(&self) -> String {
        match (self.alias(), self) {
            (Some(a), _) => a.to_string(),
            (
                None,
                FromItem::TableAt {
                    name,
                    version: VersionExpr::Literal(v),
                    ..
                },
            ) => format!("{name}(v{v})"),
            (None, _) => self.table().to_string(),
        }
    }

    /// Whether `q` names this item.
    pub fn answers_to(&self, q: &Qualifier) -> bool {
        match q {
            Qualifier::Name(n) => match self.alias() {
                Some(a) => a == n,
                None => self.table() == n,
            },
            Qualifier::At(n, v) => matches!(
                self,
                FromItem::TableAt { name, version: VersionExpr::Literal(x), alias: None }
                    if name == n && x == v
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VersionExpr {
    /// Bare table name: head of the default branch.
    Head,
    Literal(VersionId),
    Vnum(Option<Qualifier>),
    Subquery(Box<Query>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Cmp(Operand, CmpOp, Operand),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Exists(Box<Query>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Literal(Value),
    Column(ColumnRef),
    Vnum(Option<Qualifier>),
    Call(Func, String, VTerm, VTerm),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    DiffRecs,
    Distance,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VTerm {
    Literal(VersionId),
    Vnum(Option<Qualifier>),
}

impl fmt::Display for Qualifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qualifier::Name(n) => f.write_str(n),
            Qualifier::At(n, v) => write!(f, "{n}(v{v})"),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(q) = &self.qualifier {
            write!(f, "{q}.")?;
        }
        f.write_str(&self.name)
    }
}

struct VnumRef<'a>(&'a Option<Qualifier>);

impl fmt::Display for VnumRef<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(q) => write!(f, "{q}.VNUM"),
            None => f.write_str("VNUM"),
        }
    }
}

impl fmt::Display for AggFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggFn::Min => "MIN",
            AggFn::Max => "MAX",
            AggFn::Count => "COUNT",
        })
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Column(c) => write!(f, "{c}"),
            Item::Vnum(q) => write!(f, "{}", VnumRef(q)),
            Item::Agg(func, AggArg::Column(c)) => write!(f, "{func}({c})"),
            Item::Agg(func, AggArg::Vnum(q)) => write!(f, "{func}({})", VnumRef(q)),
        }
    }
}

impl fmt::Display for VTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VTerm::Literal(v) => write!(f, "{v}"),
            VTerm::Vnum(q) => write!(f, "{}", VnumRef(q)),
        }
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Func::DiffRecs => "DIFF_RECS",
            Func::Distance => "DISTANCE",
        })
    }
}

pub(crate) fn write_literal(f: &mut impl fmt::Write, v: &Value) -> fmt::Result {
    match v {
        Value::Int(n) => write!(f, "{n}"),
        Value::Float(x) => write!(f, "{x:?}"),
        Value::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
        other => write!(f, "{other:?}"),
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Literal(v) => write_literal(f, v),
            Operand::Column(c) => write!(f, "{c}"),
            Operand::Vnum(q) => write!(f, "{}", VnumRef(q)),
            Operand::Call(func, table, a, b) => write!(f, "{func}({table}, {a}, {b})"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Cmp(l, op, r) => write!(f, "{l} {} {r}", op.symbol()),
            Expr::And(a, b) => write!(f, "({a} AND {b})"),
            Expr::Or(a, b) => write!(f, "({a} OR {b})"),
            Expr::Not(e) => write!(f, "NOT ({e})"),
            Expr::Exists(q) => write!(f, "EXISTS ({q})"),
        }
    }
}

impl fmt::Display for FromItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FromItem::TableAt { name, version, alias } => {
                f.write_str(name)?;
                match version {
                    VersionExpr::Head => {}
                    VersionExpr::Literal(v) => write!(f, "(v{v})")?,
                    VersionExpr::Vnum(q) => write!(f, "({})", VnumRef(q))?,
                    VersionExpr::Subquery(q) => write!(f, "({q})")?,
                }
                if let Some(a) = alias {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
            FromItem::Versions { name, alias } => {
                write!(f, "VERSIONS({name})")?;
                if let Some(a) = alias {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        match &self.projection {
            Projection::Star => f.write_str("*")?,
            Projection::Items(items) => {
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{it}")?;
                }
            }
        }
        f.write_str(" FROM ")?;
        for (i, it) in self.from.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{it}")?;
        }
        if let Some(e) = &self.filter {
            write!(f, " WHERE {e}")?;
        }
        Ok(())
    }
}
