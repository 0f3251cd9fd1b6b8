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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VqlError {
    #[error("syntax error at {pos}: expected {}, found {found}", .expected.join(" or "))]
    Syntax {
        pos: Pos,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown function `{name}` at {pos}")]
    UnknownFunction { pos: Pos, name: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown version `{0}`")]
    UnknownVersion(String),
    #[error("version subquery must return exactly one integer: {0}")]
    NonScalarVersionSubquery(String),
    #[error("type error: {0}")]
    TypeError(String),
    #[error("cannot resolve `{0}`")]
    Unresolved(String),
    #[error(transparent)]
    Core(dsvc_core::Error),
}

impl From<dsvc_core::Error> for VqlError {
    fn from(e: dsvc_core::Error) -> Self {
        match e {
            dsvc_core::Error::UnknownVersion(v) => VqlError::UnknownVersion(v),
            dsvc_core::Error::UnknownTable(t) => VqlError::UnknownTable(t),
            other => VqlError::Core(other),
        }
    }
}

impl VqlError {
    /// Position of a parse error.
    pub fn pos(&self) -> Option<Pos> {
        match self {
            VqlError::Syntax { pos, .. } | VqlError::UnknownFunction { pos, .. } => Some(*pos),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, VqlError>;
