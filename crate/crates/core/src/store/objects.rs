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

//! Content-addressed object files under `objects/<first2hex>/<hex>`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{content_hash, ContentHash};

#[derive(Debug, Clone)]
pub struct ObjectStore {
    root: PathBuf,
}

impl ObjectStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ObjectStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, hash: &ContentHash) -> PathBuf {
        let hex = hash.to_hex();
        self.root.join(&hex[..2]).join(hex)
    }

    /// Stores `bytes` unless an identical object already exists.
    pub fn put(&self, bytes: &[u8]) -> Result<ContentHash> {
        let hash = content_hash(bytes);
        let path = self.path_of(&hash);
        if !path.exists() {
            let dir = path.parent().expect("object path has a parent");
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            super::write_atomic(&path, bytes)?;
        }
        Ok(hash)
    }

    /// Reads an object and checks its hash.
    pub fn get(&self, hash: &ContentHash) -> Result<Vec<u8>> {
        let path = self.path_of(hash);
        let bytes = std::fs::read(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::CorruptObject(format!("{hash} is missing"))
            } else {
                Error::io(&path, e)
            }
        })?;
        if content_hash(&bytes) != *hash {
            return Err(Error::CorruptObject(hash.to_hex()));
        }
        Ok(bytes)
    }

    pub fn size_of(&self, hash: &ContentHash) -> Result<u64> {
        let path = self.path_of(hash);
        Ok(std::fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len())
    }

    /// All stored object hashes.
    pub fn list(&self) -> Result<BTreeSet<ContentHash>> {
        let mut out = BTreeSet::new();
        let Ok(dirs) = std::fs::read_dir(&self.root) else {
            return Ok(out);
        };
        for dir in dirs {
            let dir = dir.map_err(|e| Error::io(&self.root, e))?.path();
            if !dir.is_dir() {
                continue;
            }
            for f in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
                let f = f.map_err(|e| Error::io(&dir, e))?.path();
                if let Some(name) = f.file_name().and_then(|n| n.to_str()) {
                    if let Ok(h) = ContentHash::from_hex(name) {
                        out.insert(h);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Deletes every object not in `keep`; returns bytes reclaimed.
    pub fn retain(&self, keep: &BTreeSet<ContentHash>) -> Result<u64> {
        let mut reclaimed = 0;
        for h in self.list()? {
            if !keep.contains(&h) {
                let path = self.path_of(&h);
                reclaimed += self.size_of(&h)?;
                std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(reclaimed)
    }
}
