//! Versioned binary container shared by models, preprocessing state and keys.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "GLYC"
//! version    u16
//! count      u32                        number of entries
//! directory  count × {
//!     name_len u16, name (UTF-8)
//!     dtype    u8                       0 = f64, 1 = i8 affine, 2 = big-endian unsigned integer
//!     rank     u8, dims rank × u64
//!     [dtype 1 only] scale f64, zero_point f64
//!     data_len u64                      bytes in the data section
//! }
//! data       concatenated entry payloads in directory order
//! doc_len    u32, document (UTF-8 JSON)
//! ```
//!
//! For dtype 1 a code `q` decodes to `zero_point + (q + 128) · scale`.

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GLYC";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum EntryData {
    F64(Vec<f64>),
    I8 { codes: Vec<i8>, scale: f64, zero_point: f64 },
    /// Big-endian magnitude of an unsigned integer.
    BigUint(Vec<u8>),
}

impl EntryData {
    fn dtype(&self) -> u8 {
        match self {
            EntryData::F64(_) => 0,
            EntryData::I8 { .. } => 1,
            EntryData::BigUint(_) => 2,
        }
    }

    fn byte_len(&self) -> usize {
        match self {
            EntryData::F64(v) => v.len() * 8,
            EntryData::I8 { codes, .. } => codes.len(),
            EntryData::BigUint(b) => b.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<u64>,
    pub data: EntryData,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub entries: Vec<Entry>,
    pub document: String,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Result<&Entry> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Format(format!("missing entry `{name}`")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&u32::try_from(self.entries.len()).map_err(too_big)?.to_le_bytes());
        for e in &self.entries {
            let name = e.name.as_bytes();
            out.extend_from_slice(&u16::try_from(name.len()).map_err(too_big)?.to_le_bytes());
            out.extend_from_slice(name);
            out.push(e.data.dtype());
            out.push(u8::try_from(e.shape.len()).map_err(too_big)?);
            for d in &e.shape {
                out.extend_from_slice(&d.to_le_bytes());
            }
            if let EntryData::I8 { scale, zero_point, .. } = &e.data {
                out.extend_from_slice(&scale.to_le_bytes());
                out.extend_from_slice(&zero_point.to_le_bytes());
            }
            out.extend_from_slice(&(e.data.byte_len() as u64).to_le_bytes());
        }
        for e in &self.entries {
            match &e.data {
                EntryData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                EntryData::I8 { codes, .. } => out.extend(codes.iter().map(|&c| c as u8)),
                EntryData::BigUint(b) => out.extend_from_slice(b),
            }
        }
        let doc = self.document.as_bytes();
        out.extend_from_slice(&u32::try_from(doc.len()).map_err(too_big)?.to_le_bytes());
        out.extend_from_slice(doc);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut dir = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Format("entry name is not UTF-8".into()))?;
            let dtype = r.u8()?;
            let rank = r.u8()? as usize;
            let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let affine = if dtype == 1 { Some((r.f64()?, r.f64()?)) } else { None };
            let len = r.u64()? as usize;
            dir.push((name, dtype, shape, affine, len));
        }
        let mut entries = Vec::with_capacity(dir.len());
        for (name, dtype, shape, affine, len) in dir {
            let raw = r.take(len)?;
            let elements: u64 = shape.iter().product();
            let data = match dtype {
                0 => {
                    if len % 8 != 0 || (len / 8) as u64 != elements {
                        return Err(Error::Format(format!("entry `{name}` size does not match shape")));
                    }
                    EntryData::F64(
                        raw.chunks_exact(8)
                            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                            .collect(),
                    )
                }
                1 => {
                    if len as u64 != elements {
                        return Err(Error::Format(format!("entry `{name}` size does not match shape")));
                    }
                    let (scale, zero_point) = affine.expect("read for dtype 1");
                    EntryData::I8 {
                        codes: raw.iter().map(|&b| b as i8).collect(),
                        scale,
                        zero_point,
                    }
                }
                2 => EntryData::BigUint(raw.to_vec()),
                other => return Err(Error::Format(format!("unknown dtype {other}"))),
            };
            entries.push(Entry { name, shape, data });
        }
        let doc_len = r.u32()? as usize;
        let document = String::from_utf8(r.take(doc_len)?.to_vec())
            .map_err(|_| Error::Format("document is not UTF-8".into()))?;
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(Checkpoint { entries, document })
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }

    /// The `kind` field of the JSON document.
    pub fn kind(&self) -> Result<String> {
        let doc: serde_json::Value = serde_json::from_str(&self.document)?;
        doc.get("kind")
            .and_then(|k| k.as_str())
            .map(str::to_string)
            .ok_or_else(|| Error::Format("document has no kind".into()))
    }
}

fn too_big<E>(_: E) -> Error {
    Error::Format("field exceeds its length prefix".into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
