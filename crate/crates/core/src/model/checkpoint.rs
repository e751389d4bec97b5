//! Binary checkpoint format, little-endian:
//!
//! ```text
//! "GDCN" u8 version=1
//! config: u32 input_size, 4 x u32 conv_filters, u8 head, u32 dense_hidden,
//!         u32 dropout_rate (f32 bit pattern), u32 num_classes
//! per tensor, in layout order: u16 name_len, name (UTF-8), u8 rank,
//!         rank x u32 dims, numel x f32
//! "ENDGDCNN"
//! ```
//!
//! The tensor count is implied by the config.

use std::fs;
use std::path::Path;

use super::config::{Head, ModelConfig, NUM_CLASSES};
use super::params::{param_layout, Parameters};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"GDCN";
pub const VERSION: u8 = 1;
pub const SENTINEL: &[u8; 8] = b"ENDGDCNN";
/// Magic, version, and the fixed-width config block.
pub const HEADER_LEN: usize = 4 + 1 + 4 + 4 * 4 + 1 + 4 + 4 + 4;

pub fn encode_checkpoint(params: &Parameters, config: &ModelConfig) -> Result<Vec<u8>> {
    config.validate()?;
    params.check_config(config)?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * params.numel() + 256);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let u32_field = |v: usize| -> Result<[u8; 4]> {
        u32::try_from(v)
            .map(|v| v.to_le_bytes())
            .map_err(|_| Error::Checkpoint(format!("value {v} does not fit u32")))
    };
    out.extend(u32_field(config.input_size)?);
    for &f in &config.conv_filters {
        out.extend(u32_field(f)?);
    }
    out.push(config.head.as_u8());
    out.extend(u32_field(config.dense_hidden)?);
    out.extend(config.dropout_rate.to_bits().to_le_bytes());
    out.extend(u32_field(NUM_CLASSES)?);
    for (name, t) in params.iter() {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Checkpoint(format!("tensor name `{name}` too long")))?;
        out.extend(len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend(u32_field(d)?);
        }
        for &v in t.data() {
            out.extend(v.to_le_bytes());
        }
    }
    out.extend_from_slice(SENTINEL);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Parameters, ModelConfig)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic").ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("bad magic bytes, not a GDCN checkpoint".into()));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let input_size = r.u32("input_size")? as usize;
    let mut conv_filters = [0usize; 4];
    for f in &mut conv_filters {
        *f = r.u32("conv_filters")? as usize;
    }
    let head_byte = r.u8("head")?;
    let head = Head::from_u8(head_byte)
        .ok_or_else(|| Error::Checkpoint(format!("unknown head code {head_byte}")))?;
    let dense_hidden = r.u32("dense_hidden")? as usize;
    let dropout_rate = f32::from_bits(r.u32("dropout_rate")?);
    let num_classes = r.u32("num_classes")? as usize;
    if num_classes != NUM_CLASSES {
        return Err(Error::Checkpoint(format!("num_classes {num_classes}, expected {NUM_CLASSES}")));
    }
    let config = ModelConfig { input_size, conv_filters, head, dense_hidden, dropout_rate };
    config.validate().map_err(|e| Error::Checkpoint(format!("embedded config: {e}")))?;

    let mut entries = Vec::new();
    for slot in param_layout(&config)? {
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        if name != slot.name {
            return Err(Error::Checkpoint(format!("expected tensor `{}`, found `{name}`", slot.name)));
        }
        let rank = r.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dims")? as usize);
        }
        if shape != slot.shape {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has shape {shape:?}, config implies {:?}",
                slot.shape
            )));
        }
        let numel: usize = shape.iter().product();
        let raw = r.take(4 * numel, "tensor data")?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        entries.push((name, Tensor::new(shape, data)?));
    }
    if r.take(SENTINEL.len(), "sentinel")? != SENTINEL {
        return Err(Error::Checkpoint("missing ENDGDCNN sentinel".into()));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes after sentinel", bytes.len() - r.pos)));
    }
    Ok((Parameters::from_entries(entries), config))
}

pub fn save_checkpoint(params: &Parameters, config: &ModelConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(params, config)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Parameters, ModelConfig)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
