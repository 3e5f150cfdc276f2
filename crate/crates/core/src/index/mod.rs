//! Sealed dense-retrieval indexes in three storage modes.
//!
//! Building runs an optional PCA reduction, an optional layer normalization
//! of every reduced row and finally the storage encoding (f32, f16 or product
//! codes). Queries go through the same reduction and normalization before
//! being scored by dot product against the stored passages.

mod f16;
mod format;
mod size;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use self::f16::{cast_f16, f16_bits_to_f32, f32_to_f16_bits, F16_MAX};
pub use self::format::{INDEX_MAGIC, INDEX_VERSION};
pub use self::size::{IndexLayout, SizeReport, CHECKSUM_BYTES, HEADER_BYTES};

use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::pq::{self, PqCodebook, PqCodes, PqTrainParams};
use crate::reduce::{self, layer_normalize, NormalizationParams, PcaModel};
use crate::topk::{self, Hit};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageMode {
    Flat32,
    Flat16,
    Pq,
}

impl StorageMode {
    pub fn as_u8(self) -> u8 {
        match self {
            StorageMode::Flat32 => 0,
            StorageMode::Flat16 => 1,
            StorageMode::Pq => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(StorageMode::Flat32),
            1 => Some(StorageMode::Flat16),
            2 => Some(StorageMode::Pq),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StorageMode::Flat32 => "flat32",
            StorageMode::Flat16 => "flat16",
            StorageMode::Pq => "pq",
        }
    }
}

impl std::str::FromStr for StorageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat32" => Ok(StorageMode::Flat32),
            "flat16" => Ok(StorageMode::Flat16),
            "pq" => Ok(StorageMode::Pq),
            other => Err(Error::param(format!("unknown storage mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for StorageMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub mode: StorageMode,
    pub d_r: Option<usize>,
    pub n_v: Option<usize>,
    pub n_b: Option<u8>,
    pub seed: u64,
    pub normalize: bool,
    #[serde(skip)]
    pub pq_train: PqTrainParams,
}

impl IndexConfig {
    pub fn new(mode: StorageMode) -> Self {
        IndexConfig {
            mode,
            d_r: None,
            n_v: None,
            n_b: None,
            seed: 0,
            normalize: false,
            pq_train: PqTrainParams::default(),
        }
    }

    pub fn flat32() -> Self {
        Self::new(StorageMode::Flat32)
    }

    pub fn flat16() -> Self {
        Self::new(StorageMode::Flat16)
    }

    pub fn pq(n_v: usize, n_b: u8) -> Self {
        IndexConfig {
            n_v: Some(n_v),
            n_b: Some(n_b),
            ..Self::new(StorageMode::Pq)
        }
    }

    pub fn with_d_r(mut self, d_r: usize) -> Self {
        self.d_r = Some(d_r);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    /// Checks internal consistency; `d` is the input dimension.
    pub fn validate(&self, d: usize) -> Result<()> {
        let pq_given = self.n_v.is_some() || self.n_b.is_some();
        match self.mode {
            StorageMode::Pq if self.n_v.is_none() || self.n_b.is_none() => {
                return Err(Error::param("pq mode needs both n_v and n_b"));
            }
            StorageMode::Flat32 | StorageMode::Flat16 if pq_given => {
                return Err(Error::param(format!("n_v/n_b only apply to pq mode, not {}", self.mode)));
            }
            _ => {}
        }
        let d_r = self.d_r.unwrap_or(d);
        if d_r == 0 || d_r > d {
            return Err(Error::param(format!("d_R = {d_r} must be in 1..={d}")));
        }
        if let (Some(n_v), Some(n_b)) = (self.n_v, self.n_b) {
            pq::check_params(d_r, n_v, n_b)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Payload {
    Flat32(Vec<f32>),
    Flat16(Vec<u16>),
    Pq { codebook: PqCodebook, codes: PqCodes },
}

/// Parameters an artifact was built with, recoverable from the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexParams {
    pub mode: StorageMode,
    pub n: usize,
    pub d_original: usize,
    pub d_r: usize,
    pub pca: bool,
    pub normalize: bool,
    pub n_v: usize,
    pub n_b: u8,
}

/// Immutable, serializable index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexArtifact {
    pub(crate) mode: StorageMode,
    pub(crate) d_original: usize,
    pub(crate) d_r: usize,
    pub(crate) pca: Option<PcaModel>,
    pub(crate) norm: Option<NormalizationParams>,
    pub(crate) ids: Vec<String>,
    pub(crate) payload: Payload,
}

pub fn build_index(x: &EmbeddingMatrix, config: &IndexConfig) -> Result<IndexArtifact> {
    config.validate(x.dim())?;
    let d_original = x.dim();

    let (pca, reduced) = match config.d_r {
        Some(d_r) => {
            let model = reduce::fit_pca(x, d_r)?;
            let y = reduce::apply_pca(&model, x)?;
            (Some(model), y)
        }
        None => (None, x.clone()),
    };
    let d_r = reduced.dim();

    let (norm, reduced) = if config.normalize {
        let p = NormalizationParams::identity(d_r);
        let mut data = Vec::with_capacity(reduced.len() * d_r);
        for row in reduced.rows() {
            data.extend(layer_normalize(row, &p));
        }
        let m = EmbeddingMatrix::new(d_r, data, reduced.ids().to_vec())?;
        (Some(p), m)
    } else {
        (None, reduced)
    };

    let payload = match config.mode {
        StorageMode::Flat32 => Payload::Flat32(reduced.data().to_vec()),
        StorageMode::Flat16 => Payload::Flat16(cast_f16(reduced.data())),
        StorageMode::Pq => {
            let (n_v, n_b) = (config.n_v.unwrap(), config.n_b.unwrap());
            let codebook = pq::pq_train_with(&reduced, n_v, n_b, config.seed, &config.pq_train)?;
            let codes = pq::pq_encode(&codebook, &reduced)?;
            Payload::Pq { codebook, codes }
        }
    };
    let (_, _, ids) = reduced.into_parts();

    Ok(IndexArtifact {
        mode: config.mode,
        d_original,
        d_r,
        pca,
        norm,
        ids,
        payload,
    })
}

impl IndexArtifact {
    pub(crate) fn from_parts(
        mode: StorageMode,
        d_original: usize,
        d_r: usize,
        pca: Option<PcaModel>,
        norm: Option<NormalizationParams>,
        ids: Vec<String>,
        payload: Payload,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::param(format!("duplicate passage id {dup:?}")));
        }
        Ok(IndexArtifact {
            mode,
            d_original,
            d_r,
            pca,
            norm,
            ids,
            payload,
        })
    }

    pub fn mode(&self) -> StorageMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn d_original(&self) -> usize {
        self.d_original
    }

    pub fn d_r(&self) -> usize {
        self.d_r
    }

    pub fn pca(&self) -> Option<&PcaModel> {
        self.pca.as_ref()
    }

    pub fn normalization(&self) -> Option<&NormalizationParams> {
        self.norm.as_ref()
    }

    pub fn codebook(&self) -> Option<&PqCodebook> {
        match &self.payload {
            Payload::Pq { codebook, .. } => Some(codebook),
            _ => None,
        }
    }

    pub fn codes(&self) -> Option<&PqCodes> {
        match &self.payload {
            Payload::Pq { codes, .. } => Some(codes),
            _ => None,
        }
    }

    /// Stored flat vectors widened to f32 (`None` in pq mode).
    pub fn flat_vectors(&self) -> Option<Vec<f32>> {
        match &self.payload {
            Payload::Flat32(v) => Some(v.clone()),
            Payload::Flat16(v) => Some(v.iter().map(|&b| f16_bits_to_f32(b)).collect()),
            Payload::Pq { .. } => None,
        }
    }

    /// Raw half-precision bits in flat16 mode.
    pub fn f16_bits(&self) -> Option<&[u16]> {
        match &self.payload {
            Payload::Flat16(v) => Some(v),
            _ => None,
        }
    }

    pub fn params(&self) -> IndexParams {
        let (n_v, n_b) = match &self.payload {
            Payload::Pq { codebook, .. } => (codebook.n_v(), codebook.n_b()),
            _ => (0, 0),
        };
        IndexParams {
            mode: self.mode,
            n: self.len(),
            d_original: self.d_original,
            d_r: self.d_r,
            pca: self.pca.is_some(),
            normalize: self.norm.is_some(),
            n_v,
            n_b,
        }
    }

    pub fn layout(&self) -> IndexLayout {
        let p = self.params();
        IndexLayout {
            mode: p.mode,
            n: p.n as u64,
            d_original: p.d_original as u64,
            d_r: p.d_r as u64,
            pca: p.pca,
            norm: p.normalize,
            n_v: p.n_v as u64,
            n_b: p.n_b,
        }
    }

    /// Applies the stored reduction and normalization to a raw query.
    pub fn transform_query(&self, q: &[f32]) -> Result<Vec<f32>> {
        if q.len() != self.d_original {
            return Err(Error::DimensionMismatch {
                expected: self.d_original,
                actual: q.len(),
            });
        }
        let mut v = match &self.pca {
            Some(m) => m.project(q)?,
            None => q.to_vec(),
        };
        if let Some(p) = &self.norm {
            v = layer_normalize(&v, p);
        }
        Ok(v)
    }

    pub fn search(&self, q: &[f32], k: usize) -> Result<Vec<Hit>> {
        let v = self.transform_query(q)?;
        let scores: Vec<f64> = match &self.payload {
            Payload::Flat32(data) => data.chunks_exact(self.d_r).map(|row| topk::dot(&v, row)).collect(),
            Payload::Flat16(data) => {
                let mut row = vec![0f32; self.d_r];
                data.chunks_exact(self.d_r)
                    .map(|bits| {
                        for (dst, &b) in row.iter_mut().zip(bits) {
                            *dst = f16_bits_to_f32(b);
                        }
                        topk::dot(&v, &row)
                    })
                    .collect()
            }
            Payload::Pq { codebook, codes } => return pq::pq_search(codebook, codes, &v, k),
        };
        Ok(topk::top_k(&self.ids, &scores, k))
    }

    pub fn size_report(&self) -> SizeReport {
        self.layout().report(util::id_block_len(&self.ids))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::encode(self)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        format::decode(buf)
    }
}

pub fn search(ix: &IndexArtifact, q: &[f32], k: usize) -> Result<Vec<Hit>> {
    ix.search(q, k)
}

pub fn index_size_bytes(ix: &IndexArtifact) -> SizeReport {
    ix.size_report()
}

pub fn save_index(ix: &IndexArtifact, path: &Path) -> Result<()> {
    util::write_atomic(path, &ix.to_bytes())
}

pub fn load_index(path: &Path) -> Result<IndexArtifact> {
    IndexArtifact::from_bytes(&util::read_file(path)?)
}

/// Exhaustive full-precision dot-product ranking; the reference every
/// approximate index is measured against.
pub fn exact_oracle_search(x: &EmbeddingMatrix, q: &[f32], k: usize) -> Vec<Hit> {
    let mut all: Vec<Hit> = x
        .ids()
        .iter()
        .zip(x.rows())
        .map(|(id, row)| Hit {
            id: id.clone(),
            score: topk::dot(q, row),
        })
        .collect();
    all.sort_by(|a, b| topk::rank_order((&a.id, a.score), (&b.id, b.score)));
    all.truncate(k);
    all
}
