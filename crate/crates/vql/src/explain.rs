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

use std::fmt::Write;

use dsvc_core::Repository;

use crate::ast::*;
use crate::eval::{routable, validate, Options};
use crate::error::Result;

/// Plan text naming the scan used for every FROM item.
pub fn explain(repo: &Repository, query: &Query) -> Result<String> {
    explain_with(query, Options::from_config(repo.config()))
}

pub fn explain_with(query: &Query, options: Options) -> Result<String> {
    validate(query)?;
    let mut out = String::new();
    plan(query, options, 0, &mut out);
    Ok(out)
}

fn line(out: &mut String, depth: usize, text: &str) {
    let _ = writeln!(out, "{}{text}", "  ".repeat(depth));
}

fn plan(q: &Query, options: Options, depth: usize, out: &mut String) {
    let head = match &q.projection {
        Projection::Star => "Project *".to_string(),
        Projection::Items(items) => {
            let cols: Vec<String> = items.iter().map(|i| i.to_string()).collect();
            if items.iter().any(|i| matches!(i, Item::Agg(..))) {
                format!("Aggregate {}", cols.join(", "))
            } else {
                format!("Project {}", cols.join(", "))
            }
        }
    };
    line(out, depth, &head);
    let mut scan_depth = depth + 1;
    if q.from.len() > 1 {
        line(out, depth + 1, &format!("NestedLoop ({} inputs)", q.from.len()));
        scan_depth += 1;
    }
    for item in &q.from {
        match item {
            FromItem::Versions { name, .. } => {
                line(out, scan_depth, &format!("VersionsScan {name} as {}", item.label()))
            }
            FromItem::TableAt { name, version, .. } => {
                let at = match version {
                    VersionExpr::Head => "head".to_string(),
                    VersionExpr::Literal(v) => format!("v{v}"),
                    VersionExpr::Vnum(Some(q)) => format!("{q}.VNUM"),
                    VersionExpr::Vnum(None) => "VNUM".to_string(),
                    VersionExpr::Subquery(_) => "subquery".to_string(),
                };
                line(
                    out,
                    scan_depth,
                    &format!("VersionFirstScan {name} @ {at} as {}", item.label()),
                );
                if let VersionExpr::Subquery(sub) = version {
                    plan(sub, options, scan_depth + 1, out);
                }
            }
        }
    }
    if let Some(e) = &q.filter {
        line(out, depth + 1, &format!("Filter {e}"));
        subqueries(e, options, depth + 2, out);
    }
}

fn subqueries(e: &Expr, options: Options, depth: usize, out: &mut String) {
    match e {
        Expr::And(a, b) | Expr::Or(a, b) => {
            subqueries(a, options, depth, out);
            subqueries(b, options, depth, out);
        }
        Expr::Not(a) => subqueries(a, options, depth, out),
        Expr::Cmp(..) => {}
        Expr::Exists(sub) => match routable(sub).filter(|_| options.record_first) {
            Some((table, vq, pred)) => {
                let at = match vq {
                    Some(q) => format!("{q}.VNUM"),
                    None => "VNUM".to_string(),
                };
                let filter = if pred.clauses.is_empty() {
                    String::new()
                } else {
                    format!(" where {pred}")
                };
                line(out, depth, "Exists");
                line(out, depth + 1, &format!("RecordFirstScan {table} @ {at}{filter}"));
            }
            None => {
                line(out, depth, "Exists");
                plan(sub, options, depth + 1, out);
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;

    const HECTOR: &str =
        "SELECT VNUM FROM VERSIONS(R) WHERE EXISTS (SELECT * FROM R(VNUM) WHERE name = 'Hector')";

    #[test]
    fn hector_uses_record_first() {
        let q = parse(HECTOR).unwrap();
        let text = explain_with(&q, Options { record_first: true }).unwrap();
        assert!(text.contains("RecordFirstScan R @ VNUM"), "{text}");
        let off = explain_with(&q, Options { record_first: false }).unwrap();
        assert!(!off.contains("RecordFirstScan"));
        assert!(off.contains("VersionFirstScan R @ VNUM"));
    }

    #[test]
    fn join_uses_two_version_first_scans() {
        let q = parse("SELECT * FROM R(v124), R(v135) WHERE R(v124).id = R(v135).id").unwrap();
        let text = explain_with(&q, Options { record_first: true }).unwrap();
        assert_eq!(text.matches("VersionFirstScan").count(), 2);
        assert!(text.contains("NestedLoop (2 inputs)"));
        assert_eq!(text, explain_with(&q, Options { record_first: true }).unwrap());
    }

    #[test]
    fn correlated_reference_to_outer_scan_is_not_routed() {
        let q = parse(
            "SELECT VNUM FROM VERSIONS(R) V WHERE EXISTS (SELECT * FROM R(V.VNUM) WHERE x = V.VNUM)",
        )
        .unwrap();
        let text = explain_with(&q, Options { record_first: true }).unwrap();
        assert!(!text.contains("RecordFirstScan"), "{text}");
    }
}
