//! `PQIX` index files.
//!
//! ```text
//! magic       b"PQIX"
//! version     u32
//! mode        u8      0 flat32, 1 flat16, 2 pq
//! d_original  u32
//! d_r         u32
//! flags       u8      bit 0: pca block present, bit 1: norm block present
//! n           u64
//! n_v         u32     0 unless pq
//! n_b         u8      0 unless pq
//! pca block   mean[d_original] f32, components[d_r × d_original] f32, eigenvalues[d_r] f32
//! norm block  gain[d_r] f32, bias[d_r] f32, epsilon f32
//! ids block   n × (u32 len, UTF-8 bytes)
//! payload     flat32: n × d_r f32
//!             flat16: n × d_r u16 (binary16 bits)
//!             pq:     codebook[n_v × 2^n_b × d_r / n_v] f32, then n packed code rows
//! checksum    u64     FNV-1a of every preceding byte
//! ```
//!
//! Little-endian throughout.

use super::{IndexArtifact, Payload, StorageMode, CHECKSUM_BYTES};
use crate::error::{Error, Result};
use crate::pq::{self, PqCodebook, PqCodes};
use crate::reduce::{NormalizationParams, PcaModel};
use crate::util::{self, fnv1a, Reader};

pub const INDEX_MAGIC: [u8; 4] = *b"PQIX";
pub const INDEX_VERSION: u32 = 1;

const FLAG_PCA: u8 = 1;
const FLAG_NORM: u8 = 2;

pub(super) fn encode(ix: &IndexArtifact) -> Vec<u8> {
    let report = ix.size_report();
    let mut out = Vec::with_capacity(report.total_bytes as usize);
    let params = ix.params();

    out.extend_from_slice(&INDEX_MAGIC);
    out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    out.push(ix.mode.as_u8());
    out.extend_from_slice(&(ix.d_original as u32).to_le_bytes());
    out.extend_from_slice(&(ix.d_r as u32).to_le_bytes());
    let mut flags = 0;
    if ix.pca.is_some() {
        flags |= FLAG_PCA;
    }
    if ix.norm.is_some() {
        flags |= FLAG_NORM;
    }
    out.push(flags);
    out.extend_from_slice(&(ix.len() as u64).to_le_bytes());
    out.extend_from_slice(&(params.n_v as u32).to_le_bytes());
    out.push(params.n_b);

    if let Some(m) = &ix.pca {
        util::put_f32s(&mut out, m.mean());
        util::put_f32s(&mut out, m.components());
        util::put_f32s(&mut out, m.eigenvalues());
    }
    if let Some(p) = &ix.norm {
        util::put_f32s(&mut out, &p.gain);
        util::put_f32s(&mut out, &p.bias);
        out.extend_from_slice(&p.epsilon.to_le_bytes());
    }
    util::put_ids(&mut out, &ix.ids);
    match &ix.payload {
        Payload::Flat32(v) => util::put_f32s(&mut out, v),
        Payload::Flat16(v) => {
            for b in v {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        Payload::Pq { codebook, codes } => {
            util::put_f32s(&mut out, codebook.centroids());
            out.extend_from_slice(&codes.to_packed());
        }
    }
    let checksum = fnv1a(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    debug_assert_eq!(out.len() as u64, report.total_bytes);
    out
}

pub(super) fn decode(buf: &[u8]) -> Result<IndexArtifact> {
    let mut r = Reader::new(buf);
    let magic = r.take(4, "magic")?;
    if magic != INDEX_MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected \"PQIX\"")));
    }
    let version = r.u32("version")?;
    if version != INDEX_VERSION {
        return Err(Error::format(4, format!("unsupported index version {version}")));
    }
    let mode_at = r.offset();
    let mode = StorageMode::from_u8(r.u8("mode")?)
        .ok_or_else(|| Error::format(mode_at, "unknown storage mode"))?;
    let d_original = r.u32("d_original")? as usize;
    let d_r = r.u32("d_r")? as usize;
    let flags_at = r.offset();
    let flags = r.u8("flags")?;
    if flags & !(FLAG_PCA | FLAG_NORM) != 0 {
        return Err(Error::format(flags_at, format!("unknown flag bits {flags:#04x}")));
    }
    let n = r.u64("n")?;
    let n = usize::try_from(n).map_err(|_| Error::format(18, "n too large"))?;
    let pq_at = r.offset();
    let n_v = r.u32("n_v")? as usize;
    let n_b = r.u8("n_b")?;

    if d_original == 0 || d_r == 0 || d_r > d_original {
        return Err(Error::format(9, format!("invalid dimensions d_original={d_original}, d_r={d_r}")));
    }
    let has_pca = flags & FLAG_PCA != 0;
    if !has_pca && d_r != d_original {
        return Err(Error::format(flags_at, "d_r differs from d_original without a pca block"));
    }
    match mode {
        StorageMode::Pq => {
            pq::check_params(d_r, n_v, n_b).map_err(|e| Error::format(pq_at, e.to_string()))?
        }
        _ if n_v != 0 || n_b != 0 => {
            return Err(Error::format(pq_at, "pq parameters set for a flat index"));
        }
        _ => {}
    }

    if buf.len() < r.offset() as usize + CHECKSUM_BYTES as usize {
        return Err(Error::format(r.offset(), "file too short for checksum"));
    }
    let body_len = buf.len() - CHECKSUM_BYTES as usize;
    let stored = u64::from_le_bytes(buf[body_len..].try_into().unwrap());
    let computed = fnv1a(&buf[..body_len]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut r = Reader::new(&buf[..body_len]);
    r.take(super::HEADER_BYTES as usize, "header")?;

    let pca = if has_pca {
        let at = r.offset();
        let mean = r.f32_vec(d_original, "pca mean")?;
        let components = r.f32_vec(d_r * d_original, "pca components")?;
        let eigenvalues = r.f32_vec(d_r, "pca eigenvalues")?;
        Some(
            PcaModel::from_parts(d_original, d_r, mean, components, eigenvalues)
                .map_err(|e| Error::format(at, e.to_string()))?,
        )
    } else {
        None
    };
    let norm = if flags & FLAG_NORM != 0 {
        let at = r.offset();
        let gain = r.f32_vec(d_r, "norm gain")?;
        let bias = r.f32_vec(d_r, "norm bias")?;
        let epsilon = r.f32_vec(1, "norm epsilon")?[0];
        let p = NormalizationParams { gain, bias, epsilon };
        p.validate().map_err(|e| Error::format(at, e.to_string()))?;
        Some(p)
    } else {
        None
    };
    let ids = r.id_block(n)?;

    let payload_at = r.offset();
    let payload = match mode {
        StorageMode::Flat32 => Payload::Flat32(r.f32_vec(n * d_r, "flat32 vectors")?),
        StorageMode::Flat16 => {
            let bytes = r.take(n * d_r * 2, "flat16 vectors")?;
            let bits: Vec<u16> = bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect();
            if let Some(i) = bits.iter().position(|&b| b & 0x7C00 == 0x7C00) {
                return Err(Error::format(payload_at + 2 * i as u64, "non-finite half value"));
            }
            Payload::Flat16(bits)
        }
        StorageMode::Pq => {
            let sub = d_r / n_v;
            let cents = r.f32_vec((n_v << n_b as usize) * sub, "codebook")?;
            let codebook = PqCodebook::from_parts(d_r, n_v, n_b, cents)
                .map_err(|e| Error::format(payload_at, e.to_string()))?;
            let codes_at = r.offset();
            let bytes = r.take(n * pq::packed_row_bytes(n_v, n_b), "codes")?;
            let codes = PqCodes::from_packed(bytes, n_v, n_b, ids.clone())
                .map_err(|e| Error::format(codes_at, e.to_string()))?;
            Payload::Pq { codebook, codes }
        }
    };
    if r.remaining() != 0 {
        return Err(Error::format(r.offset(), format!("{} trailing bytes before checksum", r.remaining())));
    }

    IndexArtifact::from_parts(mode, d_original, d_r, pca, norm, ids, payload)
        .map_err(|e| Error::format(payload_at, e.to_string()))
}
