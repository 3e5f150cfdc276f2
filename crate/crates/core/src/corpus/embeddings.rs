//! `EMB1` embedding files.
//!
//! ```text
//! magic    b"EMB1"        4 bytes
//! version  u32            4 bytes (= 1)
//! n        u64            8 bytes
//! d        u32            4 bytes
//! dtype    u8             1 byte  (0 = f32)
//! reserved [u8; 7]        7 bytes (zero)
//! ids      n × (u32 len, UTF-8 bytes)
//! data     n × d × f32, row-major
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::util::{self, Reader};

pub const EMB_MAGIC: [u8; 4] = *b"EMB1";
pub const EMB_VERSION: u32 = 1;
pub const EMB_HEADER_LEN: usize = 28;
const DTYPE_F32: u8 = 0;

/// Dense row-major matrix of f32 vectors with one string id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>, ids: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("embedding dimension must be at least 1"));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::param(format!(
                "data length {} does not equal {} rows × {dim} dims",
                data.len(),
                ids.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::param(format!("duplicate id {id:?}")));
            }
        }
        Ok(EmbeddingMatrix { dim, data, ids })
    }

    /// Builds a matrix from row vectors. Panics-free: ragged rows are an error.
    pub fn from_rows(rows: &[Vec<f32>], ids: Vec<String>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        Self::new(dim, rows.concat(), ids)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Keeps only rows whose id satisfies `keep`, preserving order.
    pub fn retain_ids(&self, mut keep: impl FnMut(&str) -> bool) -> EmbeddingMatrix {
        let mut data = Vec::new();
        let mut ids = Vec::new();
        for (id, row) in self.ids.iter().zip(self.rows()) {
            if keep(id) {
                ids.push(id.clone());
                data.extend_from_slice(row);
            }
        }
        EmbeddingMatrix {
            dim: self.dim,
            data,
            ids,
        }
    }

    pub(crate) fn into_parts(self) -> (usize, Vec<f32>, Vec<String>) {
        (self.dim, self.data, self.ids)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            EMB_HEADER_LEN + util::id_block_len(&self.ids) as usize + self.data.len() * 4,
        );
        out.extend_from_slice(&EMB_MAGIC);
        out.extend_from_slice(&EMB_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.push(DTYPE_F32);
        out.extend_from_slice(&[0u8; 7]);
        util::put_ids(&mut out, &self.ids);
        util::put_f32s(&mut out, &self.data);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let magic = r.take(4, "magic")?;
        if magic != EMB_MAGIC {
            return Err(Error::format(0, format!("bad magic {magic:?}, expected \"EMB1\"")));
        }
        let version = r.u32("version")?;
        if version != EMB_VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let n = r.u64("row count")?;
        let d = r.u32("dimension")? as usize;
        if d == 0 {
            return Err(Error::format(16, "dimension must be at least 1"));
        }
        let dtype = r.u8("dtype")?;
        if dtype != DTYPE_F32 {
            return Err(Error::format(20, format!("unsupported dtype {dtype}")));
        }
        r.take(7, "reserved bytes")?;
        let n = usize::try_from(n).map_err(|_| Error::format(8, "row count too large"))?;
        let ids = r.id_block(n)?;
        let data_at = r.offset();
        let expected = n
            .checked_mul(d)
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| Error::format(8, "n × d overflows"))?;
        if r.remaining() != expected {
            return Err(Error::format(
                data_at,
                format!(
                    "data block: expected {expected} bytes ({n} rows × {d} dims × 4), found {}",
                    r.remaining()
                ),
            ));
        }
        let data = r.f32_vec(n * d, "data block")?;
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::format(EMB_HEADER_LEN as u64, format!("duplicate id {id:?}")));
            }
        }
        Ok(EmbeddingMatrix { dim: d, data, ids })
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::from_bytes(&util::read_file(path)?)
}

pub fn save_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    util::write_atomic(path, &m.to_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_rows() -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn load_identity_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.emb");
        save_embeddings(&two_rows(), &path).unwrap();
        let m = load_embeddings(&path).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.dim(), 3);
        assert_eq!(m.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn save_of_load_is_byte_identical() {
        let bytes = two_rows().to_bytes();
        assert_eq!(EmbeddingMatrix::from_bytes(&bytes).unwrap().to_bytes(), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = two_rows().to_bytes();
        assert_eq!(&bytes[0..4], b"EMB1");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 3);
        assert_eq!(bytes[20], 0);
        // header + ids (2 × (4 + 1)) + data (6 × 4)
        assert_eq!(bytes.len(), 28 + 10 + 24);
    }

    #[test]
    fn truncated_mid_row() {
        let bytes = two_rows().to_bytes();
        let cut = &bytes[..bytes.len() - 6];
        let err = EmbeddingMatrix::from_bytes(cut).unwrap_err();
        match err {
            Error::Format { offset, message } => {
                assert_eq!(offset, 38);
                assert!(message.contains("expected 24 bytes"), "{message}");
                assert!(message.contains("found 18"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_with_offset() {
        let mut bytes = two_rows().to_bytes();
        let at = 38 + 4 * 4;
        bytes[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        match EmbeddingMatrix::from_bytes(&bytes).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, at as u64),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_magic_and_duplicates() {
        let mut bytes = two_rows().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            EmbeddingMatrix::from_bytes(&bytes),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(EmbeddingMatrix::from_rows(&[vec![1.0], vec![2.0]], vec!["x".into(), "x".into()]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            d in 1usize..6,
            rows in prop::collection::vec(prop::collection::vec(-1e6f32..1e6, 6), 0..8),
        ) {
            let ids: Vec<String> = (0..rows.len()).map(|i| format!("id-{i}")).collect();
            let rows: Vec<Vec<f32>> = rows.into_iter().map(|r| r[..d].to_vec()).collect();
            let m = EmbeddingMatrix::new(d, rows.concat(), ids).unwrap();
            let bytes = m.to_bytes();
            let back = EmbeddingMatrix::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
