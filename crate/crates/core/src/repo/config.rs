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

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::merge::DEFAULT_POLICY;
use crate::planner::DEFAULT_PLANNER;
use crate::sketch::DEFAULT_K;
use crate::store::write_atomic;

pub const CONFIG_FILE: &str = "config.json";
pub const DEFAULT_MAX_CHAIN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Tsv,
    Json,
}

/// Repository settings from `config.json`. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub default_branch: String,
    pub output_format: OutputFormat,
    /// Longest delta chain new commits and plans may create.
    pub max_chain: usize,
    pub sketch_k: usize,
    pub planner: String,
    pub merge_strategy: String,
    pub compaction_budget: Option<u64>,
    /// Deflate stored objects.
    pub compress: bool,
    /// Answer simple version-existence subqueries from the record-first index.
    pub record_first_routing: bool,
    pub author: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            default_branch: "master".into(),
            output_format: OutputFormat::Tsv,
            max_chain: DEFAULT_MAX_CHAIN,
            sketch_k: DEFAULT_K,
            planner: DEFAULT_PLANNER.into(),
            merge_strategy: DEFAULT_POLICY.into(),
            compaction_budget: None,
            compress: true,
            record_first_routing: true,
            author: "dsvc".into(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(repo: &Path) -> Result<Self> {
        let path = repo.join(CONFIG_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => Config::from_json(&text).map_err(|e| Error::json(&path, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Config::default()),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    pub fn save(&self, repo: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        write_atomic(&repo.join(CONFIG_FILE), text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::from_json(r#"{"max_chain": 4}"#).is_ok());
        assert!(Config::from_json(r#"{"max_chian": 4}"#).is_err());
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let c = Config::from_json(r#"{"output_format":"json"}"#).unwrap();
        assert_eq!(c.output_format, OutputFormat::Json);
        assert_eq!(c.max_chain, 8);
        assert_eq!(c.default_branch, "master");
    }
}
