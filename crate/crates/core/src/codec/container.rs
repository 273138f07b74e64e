//! `LFD2` bitstream container.
//!
//! Little-endian layout: magic `LFD2`, version u16, grid rows u8, grid cols u8,
//! GOP size u8, codec id u8, base QP u8, view width u16, view height u16,
//! reference count u8 followed by (u, v) byte pairs; then records of
//! poc u16, temporal layer u8, payload length u32 and the payload bytes.
//! Dropped views simply have no record.

use crate::error::{Error, Result};
use crate::lf::AngularPos;
use crate::structure::TemporalLayer;

pub const MAGIC: &[u8; 4] = b"LFD2";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecId {
    Builtin,
    External,
}

impl CodecId {
    fn to_byte(self) -> u8 {
        match self {
            CodecId::Builtin => 0,
            CodecId::External => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(CodecId::Builtin),
            1 => Ok(CodecId::External),
            _ => Err(Error::CorruptStream(format!("codec id {b}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamHeader {
    pub version: u16,
    pub grid_rows: u8,
    pub grid_cols: u8,
    pub gop_size: u8,
    pub codec_id: CodecId,
    pub base_qp: u8,
    pub width: u16,
    pub height: u16,
    pub references: Vec<AngularPos>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedView {
    pub poc: u32,
    pub tl: TemporalLayer,
    pub payload: Vec<u8>,
}

impl EncodedView {
    pub fn bit_count(&self) -> u64 {
        8 * self.payload.len() as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LfBitstream {
    pub header: StreamHeader,
    /// Sorted by POC.
    pub records: Vec<EncodedView>,
}

impl LfBitstream {
    /// Payload bits summed over all records (header excluded).
    pub fn payload_bits(&self) -> u64 {
        self.records.iter().map(EncodedView::bit_count).sum()
    }

    /// Bits per pixel over the whole light field (luma pixel count).
    pub fn bpp(&self) -> f64 {
        let h = &self.header;
        let pixels = h.grid_rows as f64 * h.grid_cols as f64 * h.width as f64 * h.height as f64;
        self.payload_bits() as f64 / pixels
    }

    pub fn pocs(&self) -> std::collections::BTreeSet<u32> {
        self.records.iter().map(|r| r.poc).collect()
    }

    pub fn record(&self, poc: u32) -> Option<&EncodedView> {
        self.records
            .binary_search_by_key(&poc, |r| r.poc)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let h = &self.header;
        let refs = u8::try_from(h.references.len())
            .map_err(|_| Error::InvalidArgument("more than 255 references".into()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&h.version.to_le_bytes());
        out.extend_from_slice(&[h.grid_rows, h.grid_cols, h.gop_size, h.codec_id.to_byte(), h.base_qp]);
        out.extend_from_slice(&h.width.to_le_bytes());
        out.extend_from_slice(&h.height.to_le_bytes());
        out.push(refs);
        for p in &h.references {
            out.push(u8::try_from(p.u).map_err(|_| Error::InvalidArgument("u > 255".into()))?);
            out.push(u8::try_from(p.v).map_err(|_| Error::InvalidArgument("v > 255".into()))?);
        }
        for r in &self.records {
            let poc = u16::try_from(r.poc).map_err(|_| Error::InvalidArgument("poc > 65535".into()))?;
            let len = u32::try_from(r.payload.len())
                .map_err(|_| Error::InvalidArgument("payload larger than 4 GiB".into()))?;
            out.extend_from_slice(&poc.to_le_bytes());
            out.push(r.tl.get());
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(&r.payload);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, at: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::CorruptStream("bad magic".into()));
        }
        let version = cur.u16()?;
        if version != VERSION {
            return Err(Error::CorruptStream(format!("unsupported version {version}")));
        }
        let grid_rows = cur.u8()?;
        let grid_cols = cur.u8()?;
        let gop_size = cur.u8()?;
        let codec_id = CodecId::from_byte(cur.u8()?)?;
        let base_qp = cur.u8()?;
        let width = cur.u16()?;
        let height = cur.u16()?;
        let nrefs = cur.u8()?;
        let mut references = Vec::with_capacity(nrefs as usize);
        for _ in 0..nrefs {
            let u = cur.u8()? as usize;
            let v = cur.u8()? as usize;
            references.push(AngularPos::new(u, v));
        }
        let mut records: Vec<EncodedView> = Vec::new();
        while !cur.is_empty() {
            let poc = cur.u16()? as u32;
            let tl = TemporalLayer::new(cur.u8()?).map_err(|e| Error::CorruptStream(e.to_string()))?;
            let len = cur.u32()? as usize;
            let payload = cur.take(len)?.to_vec();
            if records.last().is_some_and(|last| last.poc >= poc) {
                return Err(Error::CorruptStream(format!("record poc {poc} out of order")));
            }
            records.push(EncodedView { poc, tl, payload });
        }
        Ok(Self {
            header: StreamHeader {
                version,
                grid_rows,
                grid_cols,
                gop_size,
                codec_id,
                base_qp,
                width,
                height,
                references,
            },
            records,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::CorruptStream("truncated stream".into()))?;
        let slice = &self.bytes[self.at..end];
        self.at = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn is_empty(&self) -> bool {
        self.at == self.bytes.len()
    }
}
