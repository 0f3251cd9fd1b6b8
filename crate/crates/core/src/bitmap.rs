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

//! Compressed sets of version ids.
//!
//! Ids are split into a 48-bit container key and a 16-bit low part. Each
//! container is stored either as a sorted array of low parts or as a list of
//! runs, whichever is smaller; runs win when they take at most half the
//! array's bytes.

use std::collections::BTreeMap;
use std::fmt;

use crate::codec::{put_u32, put_u64, Reader};
use crate::error::{Error, Result};
use crate::model::VersionId;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Container {
    Array(Vec<u16>),
    /// Inclusive `(start, end)` runs, ascending and non-adjacent.
    Runs(Vec<(u16, u16)>),
}

impl Container {
    fn encode(values: &[u16]) -> Option<Container> {
        if values.is_empty() {
            return None;
        }
        let mut runs: Vec<(u16, u16)> = Vec::new();
        for &v in values {
            match runs.last_mut() {
                Some((_, end)) if *end as u32 + 1 == v as u32 => *end = v,
                _ => runs.push((v, v)),
            }
        }
        // array costs 2 bytes per value, runs 4 bytes per run
        if runs.len() * 4 <= values.len() {
            Some(Container::Runs(runs))
        } else {
            Some(Container::Array(values.to_vec()))
        }
    }

    fn values(&self) -> Vec<u16> {
        match self {
            Container::Array(v) => v.clone(),
            Container::Runs(runs) => runs.iter().flat_map(|&(s, e)| s..=e).collect(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Container::Array(v) => v.len(),
            Container::Runs(runs) => runs.iter().map(|&(s, e)| (e - s) as usize + 1).sum(),
        }
    }

    fn contains(&self, low: u16) -> bool {
        match self {
            Container::Array(v) => v.binary_search(&low).is_ok(),
            Container::Runs(runs) => {
                let idx = runs.partition_point(|&(s, _)| s <= low);
                idx > 0 && runs[idx - 1].1 >= low
            }
        }
    }

    fn is_runs(&self) -> bool {
        matches!(self, Container::Runs(_))
    }
}

fn split(v: VersionId) -> (u64, u16) {
    (v >> 16, (v & 0xffff) as u16)
}

/// Compressed, exact set of version ids.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct VersionBitmap {
    containers: BTreeMap<u64, Container>,
}

impl VersionBitmap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.containers.is_empty()
    }

    pub fn len(&self) -> usize {
        self.containers.values().map(Container::len).sum()
    }

    pub fn contains(&self, v: VersionId) -> bool {
        let (hi, lo) = split(v);
        self.containers.get(&hi).is_some_and(|c| c.contains(lo))
    }

    fn rebuild(&mut self, hi: u64, values: &[u16]) {
        match Container::encode(values) {
            Some(c) => {
                self.containers.insert(hi, c);
            }
            None => {
                self.containers.remove(&hi);
            }
        }
    }

    pub fn insert(&mut self, v: VersionId) -> bool {
        let (hi, lo) = split(v);
        let mut values = self.containers.get(&hi).map(Container::values).unwrap_or_default();
        match values.binary_search(&lo) {
            Ok(_) => false,
            Err(pos) => {
                values.insert(pos, lo);
                self.rebuild(hi, &values);
                true
            }
        }
    }

    pub fn remove(&mut self, v: VersionId) -> bool {
        let (hi, lo) = split(v);
        let Some(c) = self.containers.get(&hi) else {
            return false;
        };
        let mut values = c.values();
        match values.binary_search(&lo) {
            Ok(pos) => {
                values.remove(pos);
                self.rebuild(hi, &values);
                true
            }
            Err(_) => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = VersionId> + '_ {
        self.containers
            .iter()
            .flat_map(|(&hi, c)| c.values().into_iter().map(move |lo| (hi << 16) | lo as u64))
    }

    pub fn min(&self) -> Option<VersionId> {
        self.iter().next()
    }

    fn combine(&self, other: &Self, keep: impl Fn(bool, bool) -> bool) -> Self {
        let mut out = VersionBitmap::new();
        let keys: std::collections::BTreeSet<u64> = self
            .containers
            .keys()
            .chain(other.containers.keys())
            .copied()
            .collect();
        for hi in keys {
            let a = self.containers.get(&hi).map(Container::values).unwrap_or_default();
            let b = other.containers.get(&hi).map(Container::values).unwrap_or_default();
            let (mut i, mut j) = (0, 0);
            let mut merged = Vec::with_capacity(a.len().max(b.len()));
            while i < a.len() || j < b.len() {
                let (v, in_a, in_b) = match (a.get(i), b.get(j)) {
                    (Some(&x), Some(&y)) if x == y => {
                        i += 1;
                        j += 1;
                        (x, true, true)
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        i += 1;
                        (x, true, false)
                    }
                    (Some(_), Some(&y)) => {
                        j += 1;
                        (y, false, true)
                    }
                    (Some(&x), None) => {
                        i += 1;
                        (x, true, false)
                    }
                    (None, Some(&y)) => {
                        j += 1;
                        (y, false, true)
                    }
                    (None, None) => unreachable!(),
                };
                if keep(in_a, in_b) {
                    merged.push(v);
                }
            }
            out.rebuild(hi, &merged);
        }
        out
    }

    pub fn or(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a || b)
    }

    pub fn and(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && b)
    }

    pub fn and_not(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && !b)
    }

    /// Complement within `universe`.
    pub fn not_within(&self, universe: &Self) -> Self {
        universe.and_not(self)
    }

    pub fn or_inplace(&mut self, other: &Self) {
        *self = self.or(other);
    }

    /// Number of containers using run encoding.
    pub fn run_containers(&self) -> usize {
        self.containers.values().filter(|c| c.is_runs()).count()
    }

    /// Approximate encoded size in bytes.
    pub fn encoded_len(&self) -> usize {
        self.to_bytes().len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        put_u32(out, self.containers.len());
        for (&hi, c) in &self.containers {
            put_u64(out, hi);
            match c {
                Container::Array(v) => {
                    out.push(0);
                    put_u32(out, v.len());
                    for x in v {
                        out.extend_from_slice(&x.to_be_bytes());
                    }
                }
                Container::Runs(runs) => {
                    out.push(1);
                    put_u32(out, runs.len());
                    for (s, e) in runs {
                        out.extend_from_slice(&s.to_be_bytes());
                        out.extend_from_slice(&e.to_be_bytes());
                    }
                }
            }
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let mut bm = VersionBitmap::new();
        let n = r.u32()?;
        for _ in 0..n {
            let hi = r.u64()?;
            let kind = r.u8()?;
            let len = r.u32()?;
            let mut values = Vec::new();
            for _ in 0..len {
                let b = r.take(if kind == 0 { 2 } else { 4 })?;
                if kind == 0 {
                    values.push(u16::from_be_bytes([b[0], b[1]]));
                } else {
                    let (s, e) = (u16::from_be_bytes([b[0], b[1]]), u16::from_be_bytes([b[2], b[3]]));
                    if s > e {
                        return Err(Error::Decode("inverted bitmap run".into()));
                    }
                    values.extend(s..=e);
                }
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Decode("bitmap values not ascending".into()));
            }
            bm.rebuild(hi, &values);
        }
        Ok(bm)
    }
}

impl FromIterator<VersionId> for VersionBitmap {
    fn from_iter<I: IntoIterator<Item = VersionId>>(iter: I) -> Self {
        let mut groups: BTreeMap<u64, Vec<u16>> = BTreeMap::new();
        for v in iter {
            let (hi, lo) = split(v);
            groups.entry(hi).or_default().push(lo);
        }
        let mut bm = VersionBitmap::new();
        for (hi, mut values) in groups {
            values.sort_unstable();
            values.dedup();
            bm.rebuild(hi, &values);
        }
        bm
    }
}

impl fmt::Debug for VersionBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
