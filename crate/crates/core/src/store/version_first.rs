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

//! Version-first storage: every version is a materialized snapshot or a
//! delta from another stored version, recorded in `manifest.json`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::delta::{apply_delta, compute_delta, Delta};
use crate::error::{Error, Result};
use crate::model::{ContentHash, Dataset, VersionId};
use crate::sketch::{Sketch, DEFAULT_K};

/// How one version is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Placement {
    #[serde(rename = "snapshot")]
    Materialize,
    #[serde(rename = "delta")]
    DeltaFrom { from: VersionId },
}

impl Placement {
    pub fn delta_from(&self) -> Option<VersionId> {
        match self {
            Placement::Materialize => None,
            Placement::DeltaFrom { from } => Some(*from),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementKind {
    Snapshot,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub object: ContentHash,
    pub placement: PlacementKind,
    pub delta_from: Option<VersionId>,
    /// Size of the uncompressed snapshot encoding of this version.
    pub snapshot_bytes: u64,
    pub record_count: u64,
    pub tables: Vec<String>,
    /// Hex of the encoded state sketch.
    pub sketch: String,
    /// Access tick of the last checkout; larger is more recent.
    #[serde(default)]
    pub last_access: u64,
}

impl ManifestEntry {
    pub fn placement(&self) -> Placement {
        match (self.placement, self.delta_from) {
            (PlacementKind::Delta, Some(from)) => Placement::DeltaFrom { from },
            _ => Placement::Materialize,
        }
    }

    pub fn sketch(&self) -> Result<Sketch> {
        let bytes =
            hex::decode(&self.sketch).map_err(|e| Error::Decode(format!("sketch hex: {e}")))?;
        Sketch::from_bytes(&bytes)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub versions: BTreeMap<VersionId, ManifestEntry>,
    #[serde(default)]
    pub access_clock: u64,
}

/// One version's node in the storage graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageNode {
    pub version: VersionId,
    pub placement: Placement,
    pub object: ContentHash,
}

struct Cache {
    capacity: usize,
    order: VecDeque<VersionId>,
    map: HashMap<VersionId, Arc<Dataset>>,
}

impl Cache {
    fn get(&self, v: VersionId) -> Option<Arc<Dataset>> {
        self.map.get(&v).cloned()
    }

    fn put(&mut self, v: VersionId, ds: Arc<Dataset>) {
        if self.capacity == 0 || self.map.contains_key(&v) {
            return;
        }
        if self.map.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.map.remove(&old);
            }
        }
        self.order.push_back(v);
        self.map.insert(v, ds);
    }
}

pub struct VersionStore {
    root: PathBuf,
    objects: super::ObjectStore,
    manifest: Manifest,
    compress: bool,
    sketch_k: usize,
    cache: Mutex<Cache>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl VersionStore {
    /// Opens (or starts) the store rooted at a repository directory.
    pub fn open(root: impl Into<PathBuf>, compress: bool) -> Result<Self> {
        let root = root.into();
        let path = root.join(MANIFEST_FILE);
        let manifest = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(Error::io(&path, e)),
        };
        Ok(VersionStore {
            objects: super::ObjectStore::new(root.join("objects")),
            root,
            manifest,
            compress,
            sketch_k: DEFAULT_K,
            cache: Mutex::new(Cache {
                capacity: 16,
                order: VecDeque::new(),
                map: HashMap::new(),
            }),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn objects(&self) -> &super::ObjectStore {
        &self.objects
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn set_compress(&mut self, compress: bool) {
        self.compress = compress;
    }

    pub fn set_sketch_k(&mut self, k: usize) {
        self.sketch_k = k.max(1);
    }

    /// Re-reads the manifest from disk, keeping the materialization cache.
    pub fn reload_manifest(&mut self) -> Result<()> {
        let path = self.root.join(MANIFEST_FILE);
        self.manifest = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(Error::io(&path, e)),
        };
        Ok(())
    }

    pub fn set_cache_capacity(&self, capacity: usize) {
        let mut cache = self.cache.lock().unwrap();
        cache.capacity = capacity;
        cache.map.clear();
        cache.order.clear();
    }

    pub fn save_manifest(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        super::write_atomic(&self.root.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn contains(&self, v: VersionId) -> bool {
        self.manifest.versions.contains_key(&v)
    }

    pub fn entry(&self, v: VersionId) -> Result<&ManifestEntry> {
        self.manifest
            .versions
            .get(&v)
            .ok_or_else(|| Error::UnknownVersion(format!("v{v} is not stored")))
    }

    pub fn versions(&self) -> impl Iterator<Item = VersionId> + '_ {
        self.manifest.versions.keys().copied()
    }

    pub fn placements(&self) -> BTreeMap<VersionId, Placement> {
        self.manifest
            .versions
            .iter()
            .map(|(v, e)| (*v, e.placement()))
            .collect()
    }

    pub fn sketch(&self, v: VersionId) -> Result<Sketch> {
        self.entry(v)?.sketch()
    }

    /// Records a checkout of `v` for least-recently-accessed policies.
    pub fn touch(&mut self, v: VersionId) {
        self.manifest.access_clock += 1;
        let tick = self.manifest.access_clock;
        if let Some(e) = self.manifest.versions.get_mut(&v) {
            e.last_access = tick;
        }
    }

    fn encode_payload(
        &self,
        v: VersionId,
        ds: &Dataset,
        placement: Placement,
        base: Option<&Dataset>,
    ) -> Result<Vec<u8>> {
        match placement {
            Placement::Materialize => Ok(codec::encode_snapshot(ds, self.compress)),
            Placement::DeltaFrom { from } => {
                if from == v || !self.contains(from) {
                    return Err(Error::UnknownBaseVersion(from));
                }
                let owned;
                let base = match base {
                    Some(b) => b,
                    None => {
                        owned = self.materialize(from)?;
                        &owned
                    }
                };
                let mut delta = compute_delta(base, ds);
                delta.from = Some(from);
                delta.to = Some(v);
                Ok(delta.encode(self.compress))
            }
        }
    }

    /// Stores version `v`. `base`, when given, must be the dataset of the
    /// placement's base version and saves a materialization.
    pub fn put_version(
        &mut self,
        v: VersionId,
        ds: &Dataset,
        placement: Placement,
        base: Option<&Dataset>,
    ) -> Result<StorageNode> {
        let bytes = self.encode_payload(v, ds, placement, base)?;
        let object = self.objects.put(&bytes)?;
        let snapshot_bytes =
            (codec::SNAPSHOT_MAGIC.len() + 1 + codec::encode_dataset_body(ds).len()) as u64;
        let sketch = Sketch::build(ds, self.sketch_k);
        let last_access = self.manifest.versions.get(&v).map_or(0, |e| e.last_access);
        self.manifest.versions.insert(
            v,
            ManifestEntry {
                object,
                placement: match placement {
                    Placement::Materialize => PlacementKind::Snapshot,
                    Placement::DeltaFrom { .. } => PlacementKind::Delta,
                },
                delta_from: placement.delta_from(),
                snapshot_bytes,
                record_count: ds.record_count() as u64,
                tables: ds.table_names().cloned().collect(),
                sketch: hex::encode(sketch.to_bytes()),
                last_access,
            },
        );
        self.cache.lock().unwrap().put(v, Arc::new(ds.clone()));
        Ok(StorageNode {
            version: v,
            placement,
            object,
        })
    }

    /// Re-encodes an already stored version under a new placement, keeping its metadata.
    pub fn replace_placement(
        &mut self,
        v: VersionId,
        placement: Placement,
        payload: &[u8],
    ) -> Result<StorageNode> {
        let object = self.objects.put(payload)?;
        let entry = self
            .manifest
            .versions
            .get_mut(&v)
            .ok_or(Error::UnknownBaseVersion(v))?;
        entry.object = object;
        entry.placement = match placement {
            Placement::Materialize => PlacementKind::Snapshot,
            Placement::DeltaFrom { .. } => PlacementKind::Delta,
        };
        entry.delta_from = placement.delta_from();
        Ok(StorageNode {
            version: v,
            placement,
            object,
        })
    }

    /// Payload bytes `v` would take under `placement`, without writing anything.
    pub fn encoded_payload(&self, v: VersionId, placement: Placement) -> Result<Vec<u8>> {
        let ds = self.materialize(v)?;
        self.encode_payload(v, &ds, placement, None)
    }

    pub fn node(&self, v: VersionId) -> Result<StorageNode> {
        let e = self.entry(v)?;
        Ok(StorageNode {
            version: v,
            placement: e.placement(),
            object: e.object,
        })
    }

    /// Storage path from `v` back to the nearest snapshot: `[v, .., snapshot]`.
    pub fn resolve_chain(&self, v: VersionId) -> Result<Vec<StorageNode>> {
        let mut chain = vec![self.node(v)?];
        let mut seen = BTreeSet::from([v]);
        while let Placement::DeltaFrom { from } = chain.last().unwrap().placement {
            let cur = chain.last().unwrap().version;
            if !seen.insert(from) {
                return Err(Error::BrokenChain(cur));
            }
            let next = self.node(from).map_err(|_| Error::BrokenChain(cur))?;
            chain.push(next);
        }
        Ok(chain)
    }

    pub fn chain_depth(&self, v: VersionId) -> Result<usize> {
        Ok(self.resolve_chain(v)?.len() - 1)
    }

    pub fn load_delta(&self, v: VersionId) -> Result<Delta> {
        let node = self.node(v)?;
        Delta::decode(&self.objects.get(&node.object)?)
    }

    /// Reconstructs `v` by applying deltas along its storage chain.
    pub fn materialize(&self, v: VersionId) -> Result<Arc<Dataset>> {
        if let Some(ds) = self.cache.lock().unwrap().get(v) {
            return Ok(ds);
        }
        let chain = self.resolve_chain(v)?;
        let mut start = chain.len() - 1;
        let mut current: Option<Arc<Dataset>> = None;
        {
            let cache = self.cache.lock().unwrap();
            for (i, node) in chain.iter().enumerate() {
                if let Some(ds) = cache.get(node.version) {
                    start = i;
                    current = Some(ds);
                    break;
                }
            }
        }
        let mut current = match current {
            Some(ds) => ds,
            None => {
                let snap = &chain[start];
                let ds = Arc::new(codec::decode_snapshot(&self.objects.get(&snap.object)?)?);
                self.cache.lock().unwrap().put(snap.version, ds.clone());
                ds
            }
        };
        for node in chain[..start].iter().rev() {
            let delta = Delta::decode(&self.objects.get(&node.object)?)?;
            let next = Arc::new(apply_delta(&current, &delta)?);
            self.cache.lock().unwrap().put(node.version, next.clone());
            current = next;
        }
        Ok(current)
    }

    /// Distinct objects referenced by the manifest.
    pub fn referenced_objects(&self) -> BTreeSet<ContentHash> {
        self.manifest.versions.values().map(|e| e.object).collect()
    }

    /// Bytes of all referenced objects.
    pub fn stored_bytes(&self) -> Result<u64> {
        self.referenced_objects()
            .iter()
            .map(|h| self.objects.size_of(h))
            .sum()
    }

    /// Sum of uncompressed snapshot sizes over all versions.
    pub fn all_snapshots_bytes(&self) -> u64 {
        self.manifest.versions.values().map(|e| e.snapshot_bytes).sum()
    }

    /// Removes objects no version refers to.
    pub fn collect_garbage(&self) -> Result<u64> {
        self.objects.retain(&self.referenced_objects())
    }

    #[cfg(test)]
    pub(crate) fn manifest_mut(&mut self) -> &mut Manifest {
        &mut self.manifest
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Record, Table};

    fn ds(keys: std::ops::Range<u32>, tag: i64) -> Dataset {
        Dataset::from_tables([Table::with_records(
            "T",
            keys.map(|i| Record::from_pairs(format!("k{i:05}"), [("v", tag), ("i", i as i64)]).unwrap()),
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn snapshot_round_trip_and_dedup() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = VersionStore::open(dir.path(), false).unwrap();
        let d = ds(0..20, 0);
        store.put_version(1, &d, Placement::Materialize, None).unwrap();
        store.put_version(2, &d, Placement::Materialize, None).unwrap();
        assert_eq!(store.objects().list().unwrap().len(), 1);
        store.set_cache_capacity(0);
        assert_eq!(*store.materialize(1).unwrap(), d);
        assert_eq!(store.resolve_chain(1).unwrap().len(), 1);
    }

    #[test]
    fn unknown_base_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = VersionStore::open(dir.path(), false).unwrap();
        let err = store
            .put_version(2, &ds(0..3, 0), Placement::DeltaFrom { from: 1 }, None)
            .unwrap_err();
        assert!(matches!(err, Error::UnknownBaseVersion(1)));
    }

    #[test]
    fn chain_of_five_deltas() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = VersionStore::open(dir.path(), true).unwrap();
        let versions: Vec<Dataset> = (0..6).map(|i| ds(0..(10 + i), i as i64)).collect();
        store.put_version(1, &versions[0], Placement::Materialize, None).unwrap();
        for v in 2..=6u64 {
            store
                .put_version(v, &versions[v as usize - 1], Placement::DeltaFrom { from: v - 1 }, None)
                .unwrap();
        }
        let chain = store.resolve_chain(6).unwrap();
        assert_eq!(chain.len(), 6);
        assert_eq!(chain.last().unwrap().placement, Placement::Materialize);
        store.set_cache_capacity(4);
        for v in (1..=6u64).rev() {
            assert_eq!(*store.materialize(v).unwrap(), versions[v as usize - 1]);
        }
    }

    #[test]
    fn dangling_base_is_a_broken_chain() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = VersionStore::open(dir.path(), false).unwrap();
        store.put_version(1, &ds(0..3, 0), Placement::Materialize, None).unwrap();
        store
            .put_version(2, &ds(0..4, 0), Placement::DeltaFrom { from: 1 }, None)
            .unwrap();
        store.manifest_mut().versions.remove(&1);
        assert!(matches!(store.resolve_chain(2), Err(Error::BrokenChain(2))));
    }

    #[test]
    fn small_change_delta_is_smaller_than_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = VersionStore::open(dir.path(), false).unwrap();
        let base = ds(0..10_000, 0);
        let mut child = base.clone();
        let t = child.table_mut("T").unwrap();
        for i in (0..10_000).step_by(100) {
            let key = format!("k{i:05}");
            let old = t.get(&key).unwrap().clone();
            let set = [("v".to_string(), crate::model::Value::Int(1))].into();
            t.upsert(Arc::new(old.with_changes(&set, &[]).unwrap()));
        }
        let snap = store.put_version(1, &base, Placement::Materialize, None).unwrap();
        let delta = store
            .put_version(2, &child, Placement::DeltaFrom { from: 1 }, Some(&base))
            .unwrap();
        let snap_size = store.objects().size_of(&snap.object).unwrap();
        let delta_size = store.objects().size_of(&delta.object).unwrap();
        assert!(delta_size * 10 < snap_size, "{delta_size} vs {snap_size}");
    }
}
