//! Versioned binary checkpoint container.
//!
//! Layout: 4-byte magic `ODC1`, then one record per persisted buffer:
//! `u32 LE` name length, UTF-8 name, `u8` rank, rank x `u32 LE` extents,
//! then `product` x `f32 LE` values. Records run to end of file.

use crate::model::Network;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"ODC1";

pub fn save_checkpoint<P: AsRef<Path>>(net: &mut Network, path: P) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    net.visit_state(&mut |name, shape, values| {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(shape.len() as u8);
        for &d in &shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    });
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated record at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32_le(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses a checkpoint into (shape, values) records keyed by name.
pub fn read_checkpoint<P: AsRef<Path>>(path: P) -> Result<BTreeMap<String, (Vec<usize>, Vec<f64>)>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 4 || &bytes[0..4] != MAGIC {
        return Err(Error::Checkpoint("missing ODC1 magic".into()));
    }
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 4,
    };
    let mut out = BTreeMap::new();
    while cur.pos < cur.bytes.len() {
        let name_len = cur.u32_le()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Checkpoint("non-utf8 parameter name".into()))?
            .to_string();
        let rank = cur.take(1)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32_le()? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = cur.take(len * 4)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if out.insert(name.clone(), (shape, values)).is_some() {
            return Err(Error::Checkpoint(format!("duplicate parameter '{name}'")));
        }
    }
    Ok(out)
}

/// Loads a checkpoint into an existing network; every network buffer must be
/// present with a matching shape and no extra records may remain.
pub fn load_checkpoint<P: AsRef<Path>>(net: &mut Network, path: P) -> Result<()> {
    let mut records = read_checkpoint(path)?;
    net.visit_state_mut(&mut |name, shape, values| {
        let (rec_shape, rec_values) = records
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter '{name}'")))?;
        if rec_shape != shape {
            return Err(Error::Checkpoint(format!(
                "shape mismatch for '{name}': checkpoint {:?} vs model {:?}",
                rec_shape, shape
            )));
        }
        values.copy_from_slice(&rec_values);
        Ok(())
    })?;
    if let Some(name) = records.keys().next() {
        return Err(Error::Checkpoint(format!(
            "unexpected extra parameter '{name}'"
        )));
    }
    Ok(())
}
