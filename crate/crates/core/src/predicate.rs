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

//! Conjunctions of attribute comparisons.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Record, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }

    /// Operator with its operands swapped (`a < b` iff `b > a`).
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Compares two values; incomparable pairs (nulls, mismatched types) never match.
pub fn compare(lhs: &Value, op: CmpOp, rhs: &Value) -> bool {
    lhs.compare_loose(rhs).is_some_and(|o| op.holds(o))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Column {
    Key,
    Attr(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub column: Column,
    pub op: CmpOp,
    pub value: Value,
}

impl Comparison {
    pub fn attr(name: &str, op: CmpOp, value: impl Into<Value>) -> Self {
        Comparison {
            column: Column::Attr(name.to_string()),
            op,
            value: value.into(),
        }
    }

    pub fn key(op: CmpOp, key: &str) -> Self {
        Comparison {
            column: Column::Key,
            op,
            value: Value::Text(key.to_string()),
        }
    }

    /// A record lacking the attribute does not satisfy the comparison.
    pub fn matches(&self, record: &Record) -> bool {
        match &self.column {
            Column::Key => compare(&Value::Text(record.key().to_string()), self.op, &self.value),
            Column::Attr(name) => record
                .get(name)
                .is_some_and(|v| compare(v, self.op, &self.value)),
        }
    }
}

/// AND of comparisons; the empty conjunction matches everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub clauses: Vec<Comparison>,
}

impl Predicate {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn new(clauses: Vec<Comparison>) -> Self {
        Predicate { clauses }
    }

    pub fn matches(&self, record: &Record) -> bool {
        self.clauses.iter().all(|c| c.matches(record))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return f.write_str("TRUE");
        }
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            let col = match &c.column {
                Column::Key => "_key",
                Column::Attr(n) => n.as_str(),
            };
            match &c.value {
                Value::Text(s) => write!(f, "{col} {} '{}'", c.op.symbol(), s.replace('\'', "''"))?,
                v => write!(f, "{col} {} {v}", c.op.symbol())?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_attribute_never_matches() {
        let r = Record::from_pairs("k", [("a", 1i64)]).unwrap();
        assert!(!Comparison::attr("b", CmpOp::Ne, 5i64).matches(&r));
        assert!(Comparison::attr("a", CmpOp::Ne, 5i64).matches(&r));
        assert!(Comparison::attr("a", CmpOp::Le, 1.0).matches(&r));
        assert!(!Comparison::attr("a", CmpOp::Eq, "1").matches(&r));
        assert!(Comparison::key(CmpOp::Eq, "k").matches(&r));
        assert!(Predicate::all().matches(&r));
    }
}
