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

//! Recursive-descent parser.

use dsvc_core::predicate::CmpOp;
use dsvc_core::{Value, VersionId};

use crate::ast::*;
use crate::error::{Pos, Result, VqlError};
use crate::lexer::{tokenize, Kw, Tok};

pub fn parse(text: &str) -> Result<Query> {
    let mut p = Parser {
        toks: tokenize(text)?,
        at: 0,
    };
    let q = p.query()?;
    p.expect(&Tok::Eof, "end of input")?;
    Ok(q)
}

/// A bare WHERE condition.
pub fn parse_condition(text: &str) -> Result<Expr> {
    let mut p = Parser {
        toks: tokenize(text)?,
        at: 0,
    };
    let e = p.expr()?;
    p.expect(&Tok::Eof, "end of input")?;
    Ok(e)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

fn version_ident(s: &str) -> Option<VersionId> {
    let digits = s.strip_prefix('v').or_else(|| s.strip_prefix('V'))?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.at + n).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(VqlError::Syntax {
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: Kw) -> bool {
        self.eat(&Tok::Keyword(k))
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.fail(&[what])
        }
    }

    fn expect_kw(&mut self, k: Kw) -> Result<()> {
        self.expect(&Tok::Keyword(k), k.as_str())
    }

    fn name(&mut self, what: &str) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail(&[what]),
        }
    }

    fn query(&mut self) -> Result<Query> {
        self.expect_kw(Kw::Select)?;
        let projection = if self.eat(&Tok::Star) {
            Projection::Star
        } else {
            let mut items = vec![self.item()?];
            while self.eat(&Tok::Comma) {
                items.push(self.item()?);
            }
            Projection::Items(items)
        };
        self.expect_kw(Kw::From)?;
        let mut from = vec![self.from_item()?];
        while self.eat(&Tok::Comma) {
            from.push(self.from_item()?);
        }
        let filter = if self.eat_kw(Kw::Where) {
            Some(self.expr()?)
        } else {
            None
        };
        Ok(Query {
            projection,
            from,
            filter,
        })
    }

    fn item(&mut self) -> Result<Item> {
        let func = match self.peek() {
            Tok::Keyword(Kw::Min) => Some(AggFn::Min),
            Tok::Keyword(Kw::Max) => Some(AggFn::Max),
            Tok::Keyword(Kw::Count) => Some(AggFn::Count),
            _ => None,
        };
        if let Some(func) = func {
            self.bump();
            self.expect(&Tok::LParen, "`(`")?;
            let arg = match self.reference(&["column", "VNUM"])? {
                Ref::Column(c) => AggArg::Column(c),
                Ref::Vnum(q) => AggArg::Vnum(q),
            };
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(Item::Agg(func, arg));
        }
        match self.peek() {
            Tok::Ident(_) | Tok::Keyword(Kw::Vnum) => {}
            _ => return self.fail(&["`*`", "column", "VNUM", "MIN", "MAX", "COUNT"]),
        }
        Ok(match self.reference(&["column", "VNUM"])? {
            Ref::Column(c) => Item::Column(c),
            Ref::Vnum(q) => Item::Vnum(q),
        })
    }

    /// `VNUM`, `q.VNUM`, `col`, `q.col` or `R(v3).col`.
    fn reference(&mut self, expected: &[&str]) -> Result<Ref> {
        if self.eat_kw(Kw::Vnum) {
            return Ok(Ref::Vnum(None));
        }
        let pos = self.pos();
        let name = match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                s
            }
            _ => return self.fail(expected),
        };
        let qualifier = if self.peek() == &Tok::LParen {
            let literal = match (self.peek_at(1), self.peek_at(2), self.peek_at(3)) {
                (Tok::Int(v), Tok::RParen, Tok::Dot) => Some(*v),
                (Tok::Ident(s), Tok::RParen, Tok::Dot) => version_ident(s),
                _ => None,
            };
            match literal {
                Some(v) => {
                    for _ in 0..4 {
                        self.bump();
                    }
                    Qualifier::At(name, v)
                }
                None => return Err(VqlError::UnknownFunction { pos, name }),
            }
        } else if self.eat(&Tok::Dot) {
            Qualifier::Name(name)
        } else {
            return Ok(Ref::Column(ColumnRef {
                qualifier: None,
                name,
            }));
        };
        if self.eat_kw(Kw::Vnum) {
            return Ok(Ref::Vnum(Some(qualifier)));
        }
        let name = self.name("column or VNUM")?;
        Ok(Ref::Column(ColumnRef {
            qualifier: Some(qualifier),
            name,
        }))
    }

    fn alias(&mut self) -> Option<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Some(s)
            }
            _ => None,
        }
    }

    fn from_item(&mut self) -> Result<FromItem> {
        if self.eat_kw(Kw::Versions) {
            self.expect(&Tok::LParen, "`(`")?;
            let name = self.name("table name")?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(FromItem::Versions {
                name,
                alias: self.alias(),
            });
        }
        let name = match self.peek() {
            Tok::Ident(_) => self.name("table name")?,
            _ => return self.fail(&["table name", "VERSIONS"]),
        };
        let version = if self.eat(&Tok::LParen) {
            let v = self.version_expr()?;
            self.expect(&Tok::RParen, "`)`")?;
            v
        } else {
            VersionExpr::Head
        };
        Ok(FromItem::TableAt {
            name,
            version,
            alias: self.alias(),
        })
    }

    fn version_expr(&mut self) -> Result<VersionExpr> {
        match self.peek().clone() {
            Tok::Keyword(Kw::Select) => Ok(VersionExpr::Subquery(Box::new(self.query()?))),
            Tok::Int(_) | Tok::Keyword(Kw::Vnum) | Tok::Ident(_) => Ok(match self.vterm()? {
                VTerm::Literal(v) => VersionExpr::Literal(v),
                VTerm::Vnum(q) => VersionExpr::Vnum(q),
            }),
            _ => self.fail(&["version", "VNUM", "SELECT"]),
        }
    }

    fn vterm(&mut self) -> Result<VTerm> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(VTerm::Literal(v))
            }
            Tok::Keyword(Kw::Vnum) => {
                self.bump();
                Ok(VTerm::Vnum(None))
            }
            Tok::Ident(s) => {
                if self.peek_at(1) != &Tok::Dot {
                    if let Some(v) = version_ident(&s) {
                        self.bump();
                        return Ok(VTerm::Literal(v));
                    }
                }
                self.bump();
                self.expect(&Tok::Dot, "`.`")?;
                self.expect_kw(Kw::Vnum)?;
                Ok(VTerm::Vnum(Some(Qualifier::Name(s))))
            }
            _ => self.fail(&["version", "VNUM"]),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw(Kw::Or) {
            lhs = Expr::Or(Box::new(lhs), Box::new(self.and_expr()?));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.not_expr()?;
        while self.eat_kw(Kw::And) {
            lhs = Expr::And(Box::new(lhs), Box::new(self.not_expr()?));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self.eat_kw(Kw::Not) {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        if self.eat_kw(Kw::Exists) {
            self.expect(&Tok::LParen, "`(`")?;
            let q = self.query()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(Expr::Exists(Box::new(q)));
        }
        if self.eat(&Tok::LParen) {
            let e = self.expr()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(e);
        }
        let lhs = self.operand()?;
        let op = match self.peek() {
            Tok::Op(op) => {
                let op = match *op {
                    "=" => CmpOp::Eq,
                    "!=" => CmpOp::Ne,
                    "<" => CmpOp::Lt,
                    "<=" => CmpOp::Le,
                    ">" => CmpOp::Gt,
                    _ => CmpOp::Ge,
                };
                self.bump();
                op
            }
            _ => return self.fail(&["comparison operator"]),
        };
        let rhs = self.operand()?;
        Ok(Expr::Cmp(lhs, op, rhs))
    }

    fn operand(&mut self) -> Result<Operand> {
        const EXPECTED: [&str; 6] = ["literal", "column", "VNUM", "DIFF_RECS", "DISTANCE", "EXISTS"];
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                let n = i64::try_from(n).map_err(|_| VqlError::TypeError(format!("{n} exceeds 64 bits")))?;
                Ok(Operand::Literal(Value::Int(n)))
            }
            Tok::Float(x) => {
                self.bump();
                Ok(Operand::Literal(Value::Float(x)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Operand::Literal(Value::Text(s)))
            }
            Tok::Minus => {
                self.bump();
                match self.bump() {
                    Tok::Int(n) => {
                        let v = -(n as i128);
                        let v = i64::try_from(v)
                            .map_err(|_| VqlError::TypeError(format!("-{n} exceeds 64 bits")))?;
                        Ok(Operand::Literal(Value::Int(v)))
                    }
                    Tok::Float(x) => Ok(Operand::Literal(Value::Float(-x))),
                    _ => {
                        self.at -= 1;
                        self.fail(&["number"])
                    }
                }
            }
            Tok::Keyword(k @ (Kw::DiffRecs | Kw::Distance)) => {
                self.bump();
                self.expect(&Tok::LParen, "`(`")?;
                let table = self.name("table name")?;
                self.expect(&Tok::Comma, "`,`")?;
                let a = self.vterm()?;
                self.expect(&Tok::Comma, "`,`")?;
                let b = self.vterm()?;
                self.expect(&Tok::RParen, "`)`")?;
                let func = if k == Kw::DiffRecs {
                    Func::DiffRecs
                } else {
                    Func::Distance
                };
                Ok(Operand::Call(func, table, a, b))
            }
            Tok::Keyword(k @ (Kw::Min | Kw::Max | Kw::Count)) => Err(VqlError::UnknownFunction {
                pos: self.pos(),
                name: k.as_str().to_string(),
            }),
            Tok::Ident(_) | Tok::Keyword(Kw::Vnum) => Ok(match self.reference(&EXPECTED)? {
                Ref::Column(c) => Operand::Column(c),
                Ref::Vnum(q) => Operand::Vnum(q),
            }),
            _ => self.fail(&EXPECTED),
        }
    }
}

enum Ref {
    Column(ColumnRef),
    Vnum(Option<Qualifier>),
}
