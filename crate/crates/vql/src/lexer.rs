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

use std::fmt;

use crate::error::{Pos, VqlError};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Keyword(Kw),
    Int(u64),
    Float(f64),
    Str(String),
    Comma,
    LParen,
    RParen,
    Dot,
    Star,
    Minus,
    Op(&'static str),
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Select,
    From,
    Where,
    And,
    Or,
    Not,
    Exists,
    Versions,
    Vnum,
    Min,
    Max,
    Count,
    DiffRecs,
    Distance,
}

impl Kw {
    pub const ALL: [Kw; 14] = [
        Kw::Select,
        Kw::From,
        Kw::Where,
        Kw::And,
        Kw::Or,
        Kw::Not,
        Kw::Exists,
        Kw::Versions,
        Kw::Vnum,
        Kw::Min,
        Kw::Max,
        Kw::Count,
        Kw::DiffRecs,
        Kw::Distance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kw::Select => "SELECT",
            Kw::From => "FROM",
            Kw::Where => "WHERE",
            Kw::And => "AND",
            Kw::Or => "OR",
            Kw::Not => "NOT",
            Kw::Exists => "EXISTS",
            Kw::Versions => "VERSIONS",
            Kw::Vnum => "VNUM",
            Kw::Min => "MIN",
            Kw::Max => "MAX",
            Kw::Count => "COUNT",
            Kw::DiffRecs => "DIFF_RECS",
            Kw::Distance => "DISTANCE",
        }
    }

    fn lookup(word: &str) -> Option<Kw> {
        Kw::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(word))
    }
}

/// True when `word` would lex as a keyword.
pub fn is_keyword(word: &str) -> bool {
    Kw::lookup(word).is_some()
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Keyword(k) => f.write_str(k.as_str()),
            Tok::Int(n) => write!(f, "integer {n}"),
            Tok::Float(x) => write!(f, "number {x:?}"),
            Tok::Str(s) => write!(f, "string '{s}'"),
            Tok::Comma => f.write_str("`,`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Op(op) => write!(f, "`{op}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

pub fn tokenize(text: &str) -> Result<Vec<(Tok, Pos)>, VqlError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let bad = |pos: Pos, msg: &str| VqlError::Syntax {
        pos,
        expected: vec![msg.to_string()],
        found: "invalid token".to_string(),
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match Kw::lookup(&word) {
                Some(k) => Tok::Keyword(k),
                None => Tok::Ident(word),
            }
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut float = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    float = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit: String = chars[start..i].iter().collect();
            if float {
                match lit.parse::<f64>() {
                    Ok(x) if x.is_finite() => Tok::Float(x),
                    _ => return Err(bad(pos, "finite number")),
                }
            } else {
                match lit.parse::<u64>() {
                    Ok(n) => Tok::Int(n),
                    Err(_) => return Err(bad(pos, "integer within 64 bits")),
                }
            }
        } else if c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(bad(pos, "closing quote")),
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            Tok::Str(s)
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, len) = match (c, next) {
                ('<', Some('=')) => (Tok::Op("<="), 2),
                ('>', Some('=')) => (Tok::Op(">="), 2),
                ('!', Some('=')) => (Tok::Op("!="), 2),
                ('<', Some('>')) => (Tok::Op("!="), 2),
                ('<', _) => (Tok::Op("<"), 1),
                ('>', _) => (Tok::Op(">"), 1),
                ('=', _) => (Tok::Op("="), 1),
                (',', _) => (Tok::Comma, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('.', _) => (Tok::Dot, 1),
                ('*', _) => (Tok::Star, 1),
                ('-', _) => (Tok::Minus, 1),
                _ => return Err(bad(pos, "token")),
            };
            i += len;
            tok
        };
        let consumed: String = chars[start..i].iter().collect();
        for ch in consumed.chars() {
            if ch == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_and_keywords() {
        let toks = tokenize("select vnum\n FROM versions(R)").unwrap();
        assert_eq!(toks[0], (Tok::Keyword(Kw::Select), Pos { line: 1, col: 1 }));
        assert_eq!(toks[1].0, Tok::Keyword(Kw::Vnum));
        assert_eq!(toks[2].1, Pos { line: 2, col: 2 });
        assert_eq!(toks[5].0, Tok::Ident("R".into()));
    }

    #[test]
    fn literals() {
        let toks = tokenize("'it''s' 12 1.5 2e3 <> >=").unwrap();
        let kinds: Vec<Tok> = toks.into_iter().map(|t| t.0).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Str("it's".into()),
                Tok::Int(12),
                Tok::Float(1.5),
                Tok::Float(2000.0),
                Tok::Op("!="),
                Tok::Op(">="),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn unterminated_string() {
        assert!(matches!(tokenize("'abc"), Err(VqlError::Syntax { .. })));
    }
}
