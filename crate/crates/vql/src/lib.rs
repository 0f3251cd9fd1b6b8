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

//! VQL: a small SQL dialect over every version of a repository.

pub mod ast;
pub mod error;
pub mod eval;
pub mod explain;
pub mod lexer;
pub mod output;
pub mod parser;

pub use ast::Query;
pub use error::{Pos, Result, VqlError};
pub use eval::{parse_predicate, evaluate, evaluate_with, evaluate_with_stats, run, Options, ResultSet, ScanStats, KEY_COLUMN};
pub use explain::{explain, explain_with};
pub use parser::{parse, parse_condition};
