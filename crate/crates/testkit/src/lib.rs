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

//! Test oracles and generators shared by the DSVC test suites.
//!
//! Everything here is written against plain maps and brute force so that
//! it stays independent of the engine it checks.

pub mod fsutil;
pub mod gen;
pub mod graphs;
pub mod oracle;
pub mod scenario;
pub mod vqlgen;

pub use oracle::{plain, Plain};
