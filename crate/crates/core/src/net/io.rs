//! Binary weight container.
//!
//! Little-endian layout:
//!
//! ```text
//! b"SACW" | version: u32 | config hash: u64
//! repeated { name_len: u32 | name: utf-8 | shape: 4 x u32 | data: f32 * numel }
//! crc32 of everything above: u32
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::{Shape, Tensor};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"SACW";
pub const WEIGHTS_VERSION: u32 = 1;

/// Serializes every parameter of `store` in store order.
pub fn write_container(store: &ParamStore<f32>, config_hash: u64) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + store.numel() * 4);
    buf.extend_from_slice(WEIGHTS_MAGIC);
    buf.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    buf.extend_from_slice(&config_hash.to_le_bytes());
    for p in store.iter() {
        let name = p.name.as_bytes();
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name);
        for d in p.value.shape().dims() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.value.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(self.path, "truncated weight file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Parses a container into `(config hash, [(name, tensor)])`.
pub fn read_container(bytes: &[u8], path: &Path) -> Result<(u64, Vec<(String, Tensor<f32>)>)> {
    if bytes.len() < 20 {
        return Err(Error::format(path, "truncated weight file"));
    }
    if &bytes[..4] != WEIGHTS_MAGIC {
        return Err(Error::format(path, "not a SACW weight file (bad magic)"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(Error::format(path, "checksum mismatch"));
    }
    let mut r = Reader {
        buf: body,
        pos: 4,
        path,
    };
    let version = r.u32()?;
    if version != WEIGHTS_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported format version {version} (expected {WEIGHTS_VERSION})"),
        ));
    }
    let hash = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
    let mut records = Vec::new();
    while r.pos < body.len() {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::format(path, "parameter name is not utf-8"))?
            .to_owned();
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let shape = Shape::new(dims[0], dims[1], dims[2], dims[3]);
        let raw = r.take(shape.numel() * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        records.push((name, Tensor::from_vec(shape, data)?));
    }
    Ok((hash, records))
}

pub fn save_weights(store: &ParamStore<f32>, config_hash: u64, path: &Path) -> Result<()> {
    fs::write(path, write_container(store, config_hash)).map_err(|e| Error::io(path, e))
}

/// Loads a container into `store`, which must have the layout the file was
/// written from.
pub fn load_weights(store: &mut ParamStore<f32>, config_hash: u64, path: &Path) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (hash, records) = read_container(&bytes, path)?;
    if hash != config_hash {
        return Err(Error::format(
            path,
            format!("config hash {hash:016x} does not match the network ({config_hash:016x})"),
        ));
    }
    if records.len() != store.len() {
        return Err(Error::format(
            path,
            format!("{} records for a network with {} parameters", records.len(), store.len()),
        ));
    }
    for (name, tensor) in records {
        let id = store
            .find(&name)
            .ok_or_else(|| Error::format(path, format!("unknown parameter `{name}`")))?;
        let slot = store.get_mut(id);
        if slot.shape() != tensor.shape() {
            return Err(Error::format(
                path,
                format!("parameter `{name}` has shape {}, expected {}", tensor.shape(), slot.shape()),
            ));
        }
        *slot = tensor;
    }
    Ok(())
}
