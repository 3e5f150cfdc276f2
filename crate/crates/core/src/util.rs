//! Small shared helpers: FNV-1a hashing, atomic file writes and a
//! bounds-checked little-endian reader that reports byte offsets.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Streaming 64-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(FNV_OFFSET_BASIS)
    }
}

impl Fnv1a {
    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a::default();
    h.update(bytes);
    h.finish()
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Little-endian cursor over a byte slice; every failure names the offset.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(Error::format(
                self.offset(),
                format!(
                    "truncated {what}: expected {len} bytes, found {}",
                    self.remaining()
                ),
            ));
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    /// Reads `count` little-endian f32 values, rejecting NaN and infinities.
    pub fn f32_vec(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let start = self.offset();
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Error::format(start, format!("{what} length overflows")))?;
        let bytes = self.take(len, what)?;
        let mut out = Vec::with_capacity(count);
        for (i, chunk) in bytes.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::format(
                    start + 4 * i as u64,
                    format!("non-finite value in {what}"),
                ));
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Reads `count` strings, each prefixed by a u32 byte length.
    pub fn id_block(&mut self, count: usize) -> Result<Vec<String>> {
        let mut ids = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let at = self.offset();
            let len = self.u32("id length")? as usize;
            let bytes = self.take(len, "id bytes")?;
            let id = std::str::from_utf8(bytes)
                .map_err(|_| Error::format(at + 4, "id is not valid UTF-8"))?;
            ids.push(id.to_owned());
        }
        Ok(ids)
    }
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn put_ids(out: &mut Vec<u8>, ids: &[String]) {
    for id in ids {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
}

pub(crate) fn id_block_len(ids: &[String]) -> u64 {
    ids.iter().map(|id| 4 + id.len() as u64).sum()
}
