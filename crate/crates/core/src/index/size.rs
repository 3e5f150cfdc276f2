use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StorageMode;
use crate::pq;

/// Fixed header fields plus the trailing checksum.
pub const HEADER_BYTES: u64 = 4 + 4 + 1 + 4 + 4 + 1 + 8 + 4 + 1;
pub const CHECKSUM_BYTES: u64 = 8;

/// Shape of an index, enough to compute its serialized size without building it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexLayout {
    pub mode: StorageMode,
    pub n: u64,
    pub d_original: u64,
    pub d_r: u64,
    pub pca: bool,
    pub norm: bool,
    pub n_v: u64,
    pub n_b: u8,
}

impl IndexLayout {
    pub fn flat(mode: StorageMode, n: u64, d: u64) -> Self {
        IndexLayout {
            mode,
            n,
            d_original: d,
            d_r: d,
            pca: false,
            norm: false,
            n_v: 0,
            n_b: 0,
        }
    }

    pub fn pq(n: u64, d: u64, n_v: u64, n_b: u8) -> Self {
        IndexLayout {
            n_v,
            n_b,
            ..Self::flat(StorageMode::Pq, n, d)
        }
    }

    pub fn bytes_per_vector(&self) -> f64 {
        match self.mode {
            StorageMode::Flat32 => 4.0 * self.d_r as f64,
            StorageMode::Flat16 => 2.0 * self.d_r as f64,
            StorageMode::Pq => pq::packed_row_bytes(self.n_v as usize, self.n_b) as f64,
        }
    }

    pub fn bits_per_dim(&self) -> f64 {
        match self.mode {
            StorageMode::Flat32 => 32.0,
            StorageMode::Flat16 => 16.0,
            StorageMode::Pq => (self.n_v * u64::from(self.n_b)) as f64 / self.d_r as f64,
        }
    }

    /// Section sizes; `ids_bytes` is the length of the length-prefixed id block.
    pub fn report(&self, ids_bytes: u64) -> SizeReport {
        let mut b = BTreeMap::new();
        b.insert("header".to_string(), HEADER_BYTES + CHECKSUM_BYTES);
        if self.pca {
            let d = self.d_original;
            b.insert("pca".to_string(), 4 * (d + self.d_r * d + self.d_r));
        }
        if self.norm {
            b.insert("norm".to_string(), 4 * (2 * self.d_r + 1));
        }
        b.insert("ids".to_string(), ids_bytes);
        match self.mode {
            StorageMode::Flat32 => {
                b.insert("vectors".to_string(), self.n * self.d_r * 4);
            }
            StorageMode::Flat16 => {
                b.insert("vectors".to_string(), self.n * self.d_r * 2);
            }
            StorageMode::Pq => {
                let sub_dim = self.d_r / self.n_v.max(1);
                b.insert(
                    "codebook".to_string(),
                    self.n_v * (1u64 << self.n_b) * sub_dim * 4,
                );
                b.insert(
                    "codes".to_string(),
                    self.n * pq::packed_row_bytes(self.n_v as usize, self.n_b) as u64,
                );
            }
        }
        SizeReport {
            total_bytes: b.values().sum(),
            breakdown: b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeReport {
    pub total_bytes: u64,
    pub breakdown: BTreeMap<String, u64>,
}

impl SizeReport {
    pub fn section(&self, name: &str) -> u64 {
        self.breakdown.get(name).copied().unwrap_or(0)
    }

    /// Bytes spent on the vectors themselves (flat values or PQ codes).
    pub fn payload_bytes(&self) -> u64 {
        self.section("vectors") + self.section("codes")
    }
}
