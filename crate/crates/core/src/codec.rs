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

//! Canonical binary encodings.
//!
//! Values are a tag byte followed by a payload: 0 Null, 1 Bool (one byte),
//! 2 Int (i64 BE), 3 Float (IEEE bits BE), 4 Text and 5 Bytes (u32 BE length
//! then bytes). A record is its key as a Text value, a u32 BE attribute count,
//! then `(name as Text, value)` pairs in lexicographic name order.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;

use crate::error::{Error, Result};
use crate::model::{Dataset, ForeignKey, Record, Table, Value};

pub const SNAPSHOT_MAGIC: &[u8; 9] = b"DSVCSNAP1";
pub const DELTA_MAGIC: &[u8; 8] = b"DSVCDLT1";
pub const RFINDEX_MAGIC: &[u8; 8] = b"DSVCRFI1";

pub const FLAG_PLAIN: u8 = 0;
pub const FLAG_DEFLATE: u8 = 1;

const TAG_NULL: u8 = 0;
const TAG_BOOL: u8 = 1;
const TAG_INT: u8 = 2;
const TAG_FLOAT: u8 = 3;
const TAG_TEXT: u8 = 4;
const TAG_BYTES: u8 = 5;

pub(crate) fn put_u32(out: &mut Vec<u8>, n: usize) {
    out.extend_from_slice(&(n as u32).to_be_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, n: u64) {
    out.extend_from_slice(&n.to_be_bytes());
}

pub(crate) fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub(crate) fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len());
    out.extend_from_slice(b);
}

pub fn encode_value(out: &mut Vec<u8>, v: &Value) {
    match v {
        Value::Null => out.push(TAG_NULL),
        Value::Bool(b) => {
            out.push(TAG_BOOL);
            out.push(*b as u8);
        }
        Value::Int(i) => {
            out.push(TAG_INT);
            out.extend_from_slice(&i.to_be_bytes());
        }
        Value::Float(f) => {
            out.push(TAG_FLOAT);
            out.extend_from_slice(&f.to_bits().to_be_bytes());
        }
        Value::Text(s) => {
            out.push(TAG_TEXT);
            put_str(out, s);
        }
        Value::Bytes(b) => {
            out.push(TAG_BYTES);
            put_bytes(out, b);
        }
    }
}

pub fn encode_value_vec(v: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    encode_value(&mut out, v);
    out
}

fn encode_text(out: &mut Vec<u8>, s: &str) {
    out.push(TAG_TEXT);
    put_str(out, s);
}

pub fn encode_record_into(out: &mut Vec<u8>, r: &Record) {
    encode_text(out, r.key());
    put_u32(out, r.attrs().len());
    for (name, value) in r.attrs() {
        encode_text(out, name);
        encode_value(out, value);
    }
}

pub fn encode_record(r: &Record) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    encode_record_into(&mut out, r);
    out
}

/// Cursor over an encoded buffer.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Decode(format!(
                "truncated input: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::InvalidValue("invalid UTF-8 text".into()))
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>> {
        let n = self.u32()?;
        Ok(self.take(n)?.to_vec())
    }

    pub fn hash(&mut self) -> Result<crate::model::ContentHash> {
        Ok(crate::model::ContentHash(self.take(32)?.try_into().unwrap()))
    }

    pub fn value(&mut self) -> Result<Value> {
        let v = match self.u8()? {
            TAG_NULL => Value::Null,
            TAG_BOOL => match self.u8()? {
                0 => Value::Bool(false),
                1 => Value::Bool(true),
                b => return Err(Error::Decode(format!("bad bool byte {b}"))),
            },
            TAG_INT => Value::Int(i64::from_be_bytes(self.take(8)?.try_into().unwrap())),
            TAG_FLOAT => {
                let f = f64::from_bits(u64::from_be_bytes(self.take(8)?.try_into().unwrap()));
                if f.is_nan() {
                    return Err(Error::InvalidValue("NaN float".into()));
                }
                Value::Float(f)
            }
            TAG_TEXT => Value::Text(self.str()?),
            TAG_BYTES => Value::Bytes(self.bytes()?),
            t => return Err(Error::Decode(format!("unknown value tag {t}"))),
        };
        Ok(v)
    }

    fn text(&mut self) -> Result<String> {
        match self.value()? {
            Value::Text(s) => Ok(s),
            other => Err(Error::Decode(format!("expected text, got {}", other.type_name()))),
        }
    }

    pub fn record(&mut self) -> Result<Record> {
        let key = self.text()?;
        let n = self.u32()?;
        let mut attrs = BTreeMap::new();
        let mut last: Option<String> = None;
        for _ in 0..n {
            let name = self.text()?;
            if last.as_deref().is_some_and(|l| l >= name.as_str()) {
                return Err(Error::Decode(format!("attribute {name} out of order")));
            }
            let value = self.value()?;
            last = Some(name.clone());
            attrs.insert(name, value);
        }
        Record::new(key, attrs)
    }
}

/// Parses one canonical record, requiring the whole buffer to be consumed.
pub fn decode_record(bytes: &[u8]) -> Result<Record> {
    let mut r = Reader::new(bytes);
    let rec = r.record()?;
    if !r.is_empty() {
        return Err(Error::Decode("trailing bytes after record".into()));
    }
    Ok(rec)
}

/// Snapshot body without magic or flag: tables in name order, then constraints.
pub fn encode_dataset_body(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    put_u32(&mut out, ds.tables().count());
    for t in ds.tables() {
        put_str(&mut out, t.name());
        put_u64(&mut out, t.len() as u64);
        for r in t.records() {
            encode_record_into(&mut out, r);
        }
    }
    put_u32(&mut out, ds.constraints().len());
    for fk in ds.constraints() {
        put_str(&mut out, &fk.from_table);
        put_str(&mut out, &fk.from_attr);
        put_str(&mut out, &fk.to_table);
    }
    out
}

pub fn decode_dataset_body(buf: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(buf);
    let mut ds = Dataset::new();
    let tables = r.u32()?;
    for _ in 0..tables {
        let mut table = Table::new(r.str()?)?;
        let n = r.u64()?;
        for _ in 0..n {
            table.insert(r.record()?)?;
        }
        ds.add_table(table)?;
    }
    let n = r.u32()?;
    let mut constraints = Vec::with_capacity(n);
    for _ in 0..n {
        constraints.push(ForeignKey {
            from_table: r.str()?,
            from_attr: r.str()?,
            to_table: r.str()?,
        });
    }
    ds.set_constraints(constraints);
    if !r.is_empty() {
        return Err(Error::Decode("trailing bytes after snapshot".into()));
    }
    Ok(ds)
}

/// Wraps a body with its magic and compression flag.
pub fn frame(magic: &[u8], body: &[u8], compress: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(magic.len() + 1 + body.len());
    out.extend_from_slice(magic);
    if compress {
        out.push(FLAG_DEFLATE);
        let mut enc = DeflateEncoder::new(out, flate2::Compression::default());
        enc.write_all(body).expect("in-memory write");
        enc.finish().expect("in-memory write")
    } else {
        out.push(FLAG_PLAIN);
        out.extend_from_slice(body);
        out
    }
}

/// Checks the magic and flag and returns the (decompressed) body.
pub fn unframe(magic: &[u8], bytes: &[u8]) -> Result<Vec<u8>> {
    if bytes.len() < magic.len() + 1 || &bytes[..magic.len()] != magic {
        return Err(Error::Decode(format!(
            "bad magic, expected {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let body = &bytes[magic.len() + 1..];
    match bytes[magic.len()] {
        FLAG_PLAIN => Ok(body.to_vec()),
        FLAG_DEFLATE => {
            let mut out = Vec::new();
            DeflateDecoder::new(body)
                .read_to_end(&mut out)
                .map_err(|e| Error::Decode(format!("deflate: {e}")))?;
            Ok(out)
        }
        f => Err(Error::Decode(format!("unknown compression flag {f}"))),
    }
}

pub fn encode_snapshot(ds: &Dataset, compress: bool) -> Vec<u8> {
    frame(SNAPSHOT_MAGIC, &encode_dataset_body(ds), compress)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Dataset> {
    decode_dataset_body(&unframe(SNAPSHOT_MAGIC, bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            any::<i64>().prop_map(Value::Int),
            any::<f64>()
                .prop_filter("no NaN", |f| !f.is_nan())
                .prop_map(Value::Float),
            ".{0,8}".prop_map(Value::Text),
            prop::collection::vec(any::<u8>(), 0..8).prop_map(Value::Bytes),
        ]
    }

    fn arb_record() -> impl Strategy<Value = Record> {
        (
            "[a-zA-Z0-9]{1,6}",
            prop::collection::btree_map("[a-z]{1,4}", arb_value(), 0..6),
        )
            .prop_map(|(k, attrs)| Record::new(k, attrs).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn record_round_trip(r in arb_record()) {
            let bytes = encode_record(&r);
            prop_assert_eq!(decode_record(&bytes).unwrap(), r);
        }
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let a = Record::from_pairs("k", [("b", Value::Int(1)), ("a", Value::Text("x".into()))])
            .unwrap();
        let b = Record::from_pairs("k", [("a", Value::Text("x".into())), ("b", Value::Int(1))])
            .unwrap();
        assert_eq!(encode_record(&a), encode_record(&b));
    }

    #[test]
    fn layout_is_bit_exact() {
        let r = Record::from_pairs("Sam", [("age", 7i64)]).unwrap();
        let expected: Vec<u8> = [
            &[4u8, 0, 0, 0, 3][..],
            b"Sam",
            &[0, 0, 0, 1],
            &[4, 0, 0, 0, 3],
            b"age",
            &[2, 0, 0, 0, 0, 0, 0, 0, 7],
        ]
        .concat();
        assert_eq!(encode_record(&r), expected);
        let bare = Record::from_pairs("Sam", Vec::<(String, Value)>::new()).unwrap();
        assert!(!encode_record(&bare).is_empty());
    }

    #[test]
    fn rejects_bad_utf8_and_nan() {
        let mut buf = vec![4u8, 0, 0, 0, 1, 0xff, 0, 0, 0, 0];
        assert!(matches!(decode_record(&buf), Err(Error::InvalidValue(_))));
        buf = vec![4u8, 0, 0, 0, 1, b'k', 0, 0, 0, 1, 4, 0, 0, 0, 1, b'a', 3];
        buf.extend_from_slice(&f64::NAN.to_bits().to_be_bytes());
        assert!(matches!(decode_record(&buf), Err(Error::InvalidValue(_))));
    }

    #[test]
    fn snapshot_round_trip_compressed() {
        let t = Table::with_records(
            "T",
            (0..50).map(|i| Record::from_pairs(format!("k{i}"), [("v", i as i64)]).unwrap()),
        )
        .unwrap();
        let mut ds = Dataset::from_tables([t]).unwrap();
        ds.set_constraints(vec![ForeignKey {
            from_table: "T".into(),
            from_attr: "v".into(),
            to_table: "T".into(),
        }]);
        for compress in [false, true] {
            let bytes = encode_snapshot(&ds, compress);
            assert_eq!(&bytes[..9], SNAPSHOT_MAGIC);
            assert_eq!(decode_snapshot(&bytes).unwrap(), ds);
        }
    }
}
