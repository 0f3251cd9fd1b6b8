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

//! Values, records, tables and datasets.
//!
//! Records are immutable once built and are shared between dataset versions
//! through `Arc`, so cloning a dataset only clones the key maps.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::error::{Error, Result};

/// Dense version number, assigned in commit order starting at 1.
pub type VersionId = u64;

/// A typed attribute value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    Bytes(Vec<u8>),
}

impl Value {
    pub fn type_rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Bool(_) => 1,
            Value::Int(_) => 2,
            Value::Float(_) => 3,
            Value::Text(_) => 4,
            Value::Bytes(_) => 5,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Text(_) => "text",
            Value::Bytes(_) => "bytes",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Value::Float(f) if f.is_nan() => Err(Error::InvalidValue("NaN float".into())),
            _ => Ok(()),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Float(_))
    }

    /// Comparison used by predicates: numbers compare across Int/Float,
    /// other values only within the same type. `None` means incomparable.
    pub fn compare_loose(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => None,
            (Value::Int(a), Value::Float(b)) => Some(cmp_int_float(*a, *b)),
            (Value::Float(a), Value::Int(b)) => Some(cmp_int_float(*b, *a).reverse()),
            (Value::Float(a), Value::Float(b)) => a.partial_cmp(b),
            _ if self.type_rank() == other.type_rank() => Some(self.cmp(other)),
            _ => None,
        }
    }
}

/// Exact comparison of an integer with a finite or infinite float.
pub(crate) fn cmp_int_float(i: i64, f: f64) -> Ordering {
    const TWO_63: f64 = 9_223_372_036_854_775_808.0;
    if f >= TWO_63 {
        return Ordering::Less;
    }
    if f < -TWO_63 {
        return Ordering::Greater;
    }
    let whole = f.trunc();
    match (i as i128).cmp(&(whole as i128)) {
        Ordering::Equal => 0.0f64.partial_cmp(&(f - whole)).unwrap_or(Ordering::Equal),
        other => other,
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        use Value::*;
        match (self, other) {
            (Null, Null) => Ordering::Equal,
            (Bool(a), Bool(b)) => a.cmp(b),
            (Int(a), Int(b)) => a.cmp(b),
            (Float(a), Float(b)) => a.total_cmp(b),
            // Int sorts before Float when numerically equal.
            (Int(a), Float(b)) => cmp_int_float(*a, *b).then(Ordering::Less),
            (Float(a), Int(b)) => cmp_int_float(*b, *a).reverse().then(Ordering::Greater),
            (Text(a), Text(b)) => a.cmp(b),
            (Bytes(a), Bytes(b)) => a.cmp(b),
            _ => self.type_rank().cmp(&other.type_rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Text(s) => f.write_str(s),
            Value::Bytes(b) => write!(f, "0x{}", hex::encode(b)),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

/// SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContentHash(pub [u8; 32]);

impl ContentHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Decode(format!("hash {s:?}: {e}")))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::Decode(format!("hash {s:?} is not 32 bytes")))?;
        Ok(ContentHash(arr))
    }

    /// Leading 64 bits, big-endian.
    pub fn prefix_u64(&self) -> u64 {
        u64::from_be_bytes(self.0[..8].try_into().unwrap())
    }
}

impl fmt::Debug for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentHash({})", &self.to_hex()[..12])
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for ContentHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ContentHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ContentHash::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A keyed row. Attributes are kept sorted by name.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "RecordRepr", into = "RecordRepr")]
pub struct Record {
    key: String,
    attrs: BTreeMap<String, Value>,
    state: OnceLock<ContentHash>,
}

#[derive(Serialize, Deserialize)]
struct RecordRepr {
    key: String,
    attrs: BTreeMap<String, Value>,
}

impl TryFrom<RecordRepr> for Record {
    type Error = Error;
    fn try_from(r: RecordRepr) -> Result<Self> {
        Record::new(r.key, r.attrs)
    }
}

impl From<Record> for RecordRepr {
    fn from(r: Record) -> Self {
        RecordRepr {
            key: r.key,
            attrs: r.attrs,
        }
    }
}

impl Record {
    pub fn new(key: impl Into<String>, attrs: BTreeMap<String, Value>) -> Result<Self> {
        let key = key.into();
        if key.is_empty() {
            return Err(Error::InvalidRecord("empty key".into()));
        }
        for (name, value) in &attrs {
            if name.is_empty() {
                return Err(Error::InvalidRecord(format!("record {key}: empty attribute name")));
            }
            value.validate()?;
        }
        Ok(Record {
            key,
            attrs,
            state: OnceLock::new(),
        })
    }

    /// Builds a record from `(name, value)` pairs in any order.
    pub fn from_pairs<I, N, V>(key: impl Into<String>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (N, V)>,
        N: Into<String>,
        V: Into<Value>,
    {
        let mut attrs = BTreeMap::new();
        for (n, v) in pairs {
            let n = n.into();
            if attrs.insert(n.clone(), v.into()).is_some() {
                return Err(Error::InvalidRecord(format!("duplicate attribute {n}")));
            }
        }
        Record::new(key, attrs)
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn attrs(&self) -> &BTreeMap<String, Value> {
        &self.attrs
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.attrs.get(name)
    }

    /// Identity of this record state: hash of key and full content.
    pub fn state_id(&self) -> ContentHash {
        *self
            .state
            .get_or_init(|| content_hash(&codec::encode_record(self)))
    }

    /// Copy with `set` applied and `unset` removed.
    pub fn with_changes(&self, set: &BTreeMap<String, Value>, unset: &[String]) -> Result<Record> {
        let mut attrs = self.attrs.clone();
        for name in unset {
            attrs.remove(name);
        }
        for (name, value) in set {
            attrs.insert(name.clone(), value.clone());
        }
        Record::new(self.key.clone(), attrs)
    }

    pub fn into_parts(self) -> (String, BTreeMap<String, Value>) {
        (self.key, self.attrs)
    }
}

impl PartialEq for Record {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.attrs == other.attrs
    }
}

impl Eq for Record {}

impl fmt::Debug for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Record")
            .field("key", &self.key)
            .field("attrs", &self.attrs)
            .finish()
    }
}

/// A named collection of records, unique by key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    name: String,
    records: BTreeMap<String, Arc<Record>>,
}

impl Table {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidDataset("empty table name".into()));
        }
        Ok(Table {
            name,
            records: BTreeMap::new(),
        })
    }

    pub fn with_records<I: IntoIterator<Item = Record>>(
        name: impl Into<String>,
        records: I,
    ) -> Result<Self> {
        let mut table = Table::new(name)?;
        for r in records {
            table.insert(r)?;
        }
        Ok(table)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&Arc<Record>> {
        self.records.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.records.contains_key(key)
    }

    pub fn records(&self) -> impl Iterator<Item = &Arc<Record>> {
        self.records.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.records.keys()
    }

    /// Inserts a new record; fails if the key is taken.
    pub fn insert(&mut self, record: Record) -> Result<()> {
        self.insert_shared(Arc::new(record))
    }

    pub fn insert_shared(&mut self, record: Arc<Record>) -> Result<()> {
        if self.records.contains_key(record.key()) {
            return Err(Error::DuplicateInsert {
                table: self.name.clone(),
                key: record.key().to_string(),
            });
        }
        self.records.insert(record.key().to_string(), record);
        Ok(())
    }

    /// Inserts or replaces, returning the previous record.
    pub fn upsert(&mut self, record: Arc<Record>) -> Option<Arc<Record>> {
        self.records.insert(record.key().to_string(), record)
    }

    pub fn remove(&mut self, key: &str) -> Option<Arc<Record>> {
        self.records.remove(key)
    }
}

/// Declared but unenforced reference from one table's attribute to another table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from_table: String,
    pub from_attr: String,
    pub to_table: String,
}

/// A set of tables plus declared constraints.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    tables: BTreeMap<String, Table>,
    constraints: Vec<ForeignKey>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a dataset, rejecting repeated table names.
    pub fn from_tables<I: IntoIterator<Item = Table>>(tables: I) -> Result<Self> {
        let mut ds = Dataset::new();
        for t in tables {
            ds.add_table(t)?;
        }
        Ok(ds)
    }

    pub fn add_table(&mut self, table: Table) -> Result<()> {
        if self.tables.contains_key(table.name()) {
            return Err(Error::InvalidDataset(format!(
                "duplicate table name {}",
                table.name()
            )));
        }
        self.tables.insert(table.name().to_string(), table);
        Ok(())
    }

    pub fn remove_table(&mut self, name: &str) -> Option<Table> {
        self.tables.remove(name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    pub fn table_mut(&mut self, name: &str) -> Option<&mut Table> {
        self.tables.get_mut(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.values()
    }

    pub fn table_names(&self) -> impl Iterator<Item = &String> {
        self.tables.keys()
    }

    pub fn has_table(&self, name: &str) -> bool {
        self.tables.contains_key(name)
    }

    pub fn record_count(&self) -> usize {
        self.tables.values().map(Table::len).sum()
    }

    pub fn constraints(&self) -> &[ForeignKey] {
        &self.constraints
    }

    /// Replaces the constraint list; stored sorted and deduplicated.
    pub fn set_constraints(&mut self, mut constraints: Vec<ForeignKey>) {
        constraints.sort();
        constraints.dedup();
        self.constraints = constraints;
    }

    /// Checks that every constraint names tables present in the dataset.
    pub fn check_constraint_names(&self) -> Result<()> {
        for fk in &self.constraints {
            for t in [&fk.from_table, &fk.to_table] {
                if !self.tables.contains_key(t) {
                    return Err(Error::ConstraintNameUnknown(t.clone()));
                }
            }
        }
        Ok(())
    }

    /// Hash of the canonical snapshot encoding.
    pub fn content_hash(&self) -> ContentHash {
        content_hash(&codec::encode_dataset_body(self))
    }
}

/// SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> ContentHash {
    use sha2::{Digest, Sha256};
    ContentHash(Sha256::digest(bytes).into())
}

/// Canonical bytes of a record.
pub fn canonical_serialize(record: &Record) -> Vec<u8> {
    codec::encode_record(record)
}

/// State identity of a record: hash of its canonical bytes.
pub fn record_state_id(record: &Record) -> ContentHash {
    record.state_id()
}
