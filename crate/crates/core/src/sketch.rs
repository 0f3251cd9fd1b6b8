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

//! K-minimum-values synopses of a dataset's record states, used to estimate
//! how many record states two versions do not share.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{content_hash, Dataset};

pub const DEFAULT_K: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sketch {
    pub k: usize,
    /// Exact number of record states summarized.
    pub count: u64,
    /// The `k` smallest state hashes, ascending and distinct.
    pub hashes: Vec<u64>,
}

fn table_salt(name: &str) -> u64 {
    content_hash(name.as_bytes()).prefix_u64()
}

/// 64-bit hashes of every record state in `ds`, salted by table name.
pub fn state_hashes(ds: &Dataset) -> impl Iterator<Item = u64> + '_ {
    ds.tables().flat_map(|t| {
        let salt = table_salt(t.name());
        t.records().map(move |r| r.state_id().prefix_u64() ^ salt)
    })
}

impl Sketch {
    pub fn build(ds: &Dataset, k: usize) -> Sketch {
        Sketch::from_hashes(state_hashes(ds), k)
    }

    pub fn from_hashes<I: IntoIterator<Item = u64>>(hashes: I, k: usize) -> Sketch {
        // bounded max-heap would also work; k is small
        let mut kept: BTreeSet<u64> = BTreeSet::new();
        let mut count = 0u64;
        for h in hashes {
            count += 1;
            if kept.len() < k {
                kept.insert(h);
            } else if let Some(&max) = kept.last() {
                if h < max && kept.insert(h) {
                    kept.pop_last();
                }
            }
        }
        Sketch {
            k,
            count,
            hashes: kept.into_iter().collect(),
        }
    }

    /// True when the sketch holds every hash of the summarized set.
    pub fn is_exact(&self) -> bool {
        self.count as usize <= self.k
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.hashes.len());
        out.extend_from_slice(&(self.k as u32).to_be_bytes());
        out.extend_from_slice(&self.count.to_be_bytes());
        for h in &self.hashes {
            out.extend_from_slice(&h.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Sketch> {
        if bytes.len() < 12 || (bytes.len() - 12) % 8 != 0 {
            return Err(Error::Decode("bad sketch length".into()));
        }
        let k = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        let count = u64::from_be_bytes(bytes[4..12].try_into().unwrap());
        let hashes: Vec<u64> = bytes[12..]
            .chunks_exact(8)
            .map(|c| u64::from_be_bytes(c.try_into().unwrap()))
            .collect();
        if hashes.windows(2).any(|w| w[0] >= w[1]) || hashes.len() > k {
            return Err(Error::Decode("sketch hashes not sorted".into()));
        }
        Ok(Sketch { k, count, hashes })
    }
}

pub fn build_sketch(ds: &Dataset) -> Sketch {
    Sketch::build(ds, DEFAULT_K)
}

/// Estimated size of the symmetric difference of the two summarized state sets.
///
/// Exact when both sketches are exhaustive. Otherwise the Jaccard index is
/// estimated on the hash range both sketches fully cover, and combined with
/// the exact set sizes: `|A△B| = (|A|+|B|)(1-J)/(1+J)`.
pub fn estimate_diff(a: &Sketch, b: &Sketch) -> Result<f64> {
    if a.k != b.k {
        return Err(Error::SketchMismatch(a.k, b.k));
    }
    if a == b {
        return Ok(0.0);
    }
    let threshold = [a, b]
        .iter()
        .filter(|s| !s.is_exact())
        .filter_map(|s| s.hashes.last().copied())
        .min()
        .unwrap_or(u64::MAX);
    let sa: BTreeSet<u64> = a.hashes.iter().copied().filter(|&h| h <= threshold).collect();
    let sb: BTreeSet<u64> = b.hashes.iter().copied().filter(|&h| h <= threshold).collect();
    let union = sa.union(&sb).count();
    let sym = sa.symmetric_difference(&sb).count();
    if a.is_exact() && b.is_exact() {
        return Ok(sym as f64);
    }
    if union == 0 {
        return Ok((a.count + b.count) as f64);
    }
    let jaccard = (union - sym) as f64 / union as f64;
    Ok((a.count + b.count) as f64 * (1.0 - jaccard) / (1.0 + jaccard))
}
