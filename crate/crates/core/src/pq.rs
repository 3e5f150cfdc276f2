//! Product quantization for inner-product search.
//!
//! A `d`-vector is split into `n_v` contiguous sub-vectors of `d / n_v`
//! dimensions; each is replaced by the index of its nearest centroid in a
//! per-sub-space codebook of `2^n_b` entries. Queries are scored against codes
//! with asymmetric distance computation: one table of query/centroid dot
//! products per sub-space, summed along the code row.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::kmeans::{self, kmeans_fit_with};
use crate::topk::{self, Hit};

pub const SUPPORTED_BITS: [u8; 5] = [1, 2, 4, 8, 16];
pub const DEFAULT_SAMPLE_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PqTrainParams {
    pub max_iter: usize,
    pub tolerance_ppm: u32,
    /// Codebooks are fitted on at most this many rows.
    pub sample_cap: usize,
}

impl Default for PqTrainParams {
    fn default() -> Self {
        PqTrainParams {
            max_iter: kmeans::DEFAULT_MAX_ITER,
            tolerance_ppm: 1,
            sample_cap: DEFAULT_SAMPLE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqCodebook {
    d: usize,
    n_v: usize,
    n_b: u8,
    centroids: Vec<f32>,
}

pub fn check_params(d: usize, n_v: usize, n_b: u8) -> Result<()> {
    if !SUPPORTED_BITS.contains(&n_b) {
        return Err(Error::param(format!("n_b = {n_b} not supported; use one of 1, 2, 4, 8, 16")));
    }
    if n_v == 0 || !d.is_multiple_of(n_v) {
        return Err(Error::param(format!("n_v = {n_v} does not divide dimension d = {d}")));
    }
    Ok(())
}

impl PqCodebook {
    pub fn from_parts(d: usize, n_v: usize, n_b: u8, centroids: Vec<f32>) -> Result<Self> {
        check_params(d, n_v, n_b)?;
        let expected = n_v << n_b as usize;
        if centroids.len() != expected * (d / n_v) {
            return Err(Error::param("codebook length does not match n_v × 2^n_b × sub_dim"));
        }
        Ok(PqCodebook { d, n_v, n_b, centroids })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_b(&self) -> u8 {
        self.n_b
    }

    pub fn sub_dim(&self) -> usize {
        self.d / self.n_v
    }

    pub fn n_centroids(&self) -> usize {
        1 << self.n_b
    }

    /// `n_v × 2^n_b × sub_dim`, sub-space major.
    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    /// All centroids of sub-space `j`, row-major `2^n_b × sub_dim`.
    pub fn subspace(&self, j: usize) -> &[f32] {
        let len = self.n_centroids() * self.sub_dim();
        &self.centroids[j * len..(j + 1) * len]
    }

    pub fn centroid(&self, j: usize, c: usize) -> &[f32] {
        let s = self.sub_dim();
        &self.subspace(j)[c * s..(c + 1) * s]
    }

    pub fn bytes_per_code_row(&self) -> usize {
        packed_row_bytes(self.n_v, self.n_b)
    }

    pub fn encode_vector(&self, x: &[f32]) -> Result<Vec<u16>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: x.len(),
            });
        }
        let s = self.sub_dim();
        Ok((0..self.n_v)
            .map(|j| kmeans::nearest(&x[j * s..(j + 1) * s], self.subspace(j), s).0 as u16)
            .collect())
    }

    pub fn decode_row(&self, codes: &[u16]) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.d);
        for (j, &c) in codes.iter().enumerate() {
            out.extend_from_slice(self.centroid(j, c as usize));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqCodes {
    n_v: usize,
    n_b: u8,
    codes: Vec<u16>,
    ids: Vec<String>,
}

impl PqCodes {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_b(&self) -> u8 {
        self.n_b
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[u16] {
        &self.codes[i * self.n_v..(i + 1) * self.n_v]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u16]> {
        self.codes.chunks_exact(self.n_v.max(1))
    }

    /// Packs each row into `ceil(n_v · n_b / 8)` bytes, little-endian bit order.
    pub fn to_packed(&self) -> Vec<u8> {
        let row_bytes = packed_row_bytes(self.n_v, self.n_b);
        let mut out = vec![0u8; row_bytes * self.len()];
        for (row, dst) in self.rows().zip(out.chunks_exact_mut(row_bytes.max(1))) {
            pack_row(row, self.n_b, dst);
        }
        out
    }

    /// Inverse of [`to_packed`](Self::to_packed). Non-zero padding bits are an error.
    pub fn from_packed(bytes: &[u8], n_v: usize, n_b: u8, ids: Vec<String>) -> Result<Self> {
        let row_bytes = packed_row_bytes(n_v, n_b);
        if bytes.len() != row_bytes * ids.len() {
            return Err(Error::param(format!(
                "code block has {} bytes, expected {}",
                bytes.len(),
                row_bytes * ids.len()
            )));
        }
        let mut codes = Vec::with_capacity(n_v * ids.len());
        for (r, src) in bytes.chunks_exact(row_bytes.max(1)).take(ids.len()).enumerate() {
            let start = codes.len();
            codes.extend((0..n_v).map(|j| read_code(src, j * n_b as usize, n_b)));
            let used = n_v * n_b as usize;
            for bit in used..row_bytes * 8 {
                if src[bit / 8] >> (bit % 8) & 1 == 1 {
                    return Err(Error::param(format!("non-zero padding bits in code row {r}")));
                }
            }
            debug_assert_eq!(codes.len() - start, n_v);
        }
        Ok(PqCodes { n_v, n_b, codes, ids })
    }

    pub(crate) fn from_parts(n_v: usize, n_b: u8, codes: Vec<u16>, ids: Vec<String>) -> Self {
        debug_assert_eq!(codes.len(), n_v * ids.len());
        PqCodes { n_v, n_b, codes, ids }
    }
}

pub fn packed_row_bytes(n_v: usize, n_b: u8) -> usize {
    (n_v * n_b as usize).div_ceil(8)
}

fn pack_row(row: &[u16], n_b: u8, dst: &mut [u8]) {
    for (j, &code) in row.iter().enumerate() {
        let base = j * n_b as usize;
        for b in 0..n_b as usize {
            if code >> b & 1 == 1 {
                let bit = base + b;
                dst[bit / 8] |= 1 << (bit % 8);
            }
        }
    }
}

fn read_code(src: &[u8], base: usize, n_b: u8) -> u16 {
    let mut code = 0u16;
    for b in 0..n_b as usize {
        let bit = base + b;
        code |= u16::from(src[bit / 8] >> (bit % 8) & 1) << b;
    }
    code
}

pub fn pq_train(x: &EmbeddingMatrix, n_v: usize, n_b: u8, seed: u64) -> Result<PqCodebook> {
    pq_train_with(x, n_v, n_b, seed, &PqTrainParams::default())
}

/// Fits one k-means codebook per sub-space. Sub-space `j` draws from ChaCha
/// stream `j` of `seed`, so the result does not depend on thread scheduling.
pub fn pq_train_with(
    x: &EmbeddingMatrix,
    n_v: usize,
    n_b: u8,
    seed: u64,
    params: &PqTrainParams,
) -> Result<PqCodebook> {
    let d = x.dim();
    check_params(d, n_v, n_b)?;
    if x.is_empty() {
        return Err(Error::param("cannot train a codebook on zero vectors"));
    }
    let sub = d / n_v;
    let full_k = 1usize << n_b;

    let rows: Vec<usize> = if x.len() > params.sample_cap.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let mut picked = index::sample(&mut rng, x.len(), params.sample_cap.max(1)).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..x.len()).collect()
    };
    let k = full_k.min(rows.len());
    let tol = f64::from(params.tolerance_ppm) * 1e-6;

    let books: Vec<Vec<f32>> = (0..n_v)
        .into_par_iter()
        .map(|j| {
            let mut pts = Vec::with_capacity(rows.len() * sub);
            for &r in &rows {
                pts.extend_from_slice(&x.row(r)[j * sub..(j + 1) * sub]);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let km = kmeans_fit_with(&pts, sub, k, params.max_iter, tol, &mut rng)?;
            let mut book = km.centroids;
            // pad to 2^n_b entries so every code keeps its full width
            let last = book[(k - 1) * sub..k * sub].to_vec();
            for _ in k..full_k {
                book.extend_from_slice(&last);
            }
            Ok(book)
        })
        .collect::<Result<_>>()?;

    PqCodebook::from_parts(d, n_v, n_b, books.concat())
}

pub fn pq_encode(cb: &PqCodebook, x: &EmbeddingMatrix) -> Result<PqCodes> {
    if x.dim() != cb.d {
        return Err(Error::DimensionMismatch {
            expected: cb.d,
            actual: x.dim(),
        });
    }
    let per_row: Vec<Vec<u16>> = x
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|row| cb.encode_vector(row))
        .collect::<Result<_>>()?;
    Ok(PqCodes::from_parts(cb.n_v, cb.n_b, per_row.concat(), x.ids().to_vec()))
}

pub fn pq_decode(cb: &PqCodebook, codes: &PqCodes) -> Result<EmbeddingMatrix> {
    if codes.n_v != cb.n_v || codes.n_b != cb.n_b {
        return Err(Error::param("codes were produced by a different codebook shape"));
    }
    let mut data = Vec::with_capacity(codes.len() * cb.d);
    for row in codes.rows().take(codes.len()) {
        data.extend(cb.decode_row(row));
    }
    EmbeddingMatrix::new(cb.d, data, codes.ids.clone())
}

/// Per-sub-space query/centroid dot products.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcTable {
    n_v: usize,
    k: usize,
    values: Vec<f64>,
}

impl AdcTable {
    pub fn get(&self, j: usize, c: usize) -> f64 {
        self.values[j * self.k + c]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.k..(j + 1) * self.k]
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn score(&self, codes: &[u16]) -> f64 {
        codes
            .iter()
            .enumerate()
            .map(|(j, &c)| self.values[j * self.k + c as usize])
            .sum()
    }
}

pub fn adc_score_table(cb: &PqCodebook, q: &[f32]) -> Result<AdcTable> {
    if q.len() != cb.d {
        return Err(Error::DimensionMismatch {
            expected: cb.d,
            actual: q.len(),
        });
    }
    let s = cb.sub_dim();
    let k = cb.n_centroids();
    let mut values = Vec::with_capacity(cb.n_v * k);
    for j in 0..cb.n_v {
        let qs = &q[j * s..(j + 1) * s];
        values.extend(cb.subspace(j).chunks_exact(s).map(|c| topk::dot(qs, c)));
    }
    Ok(AdcTable { n_v: cb.n_v, k, values })
}

pub fn pq_search(cb: &PqCodebook, codes: &PqCodes, q: &[f32], k: usize) -> Result<Vec<Hit>> {
    let table = adc_score_table(cb, q)?;
    let scores: Vec<f64> = codes.rows().take(codes.len()).map(|r| table.score(r)).collect();
    Ok(topk::top_k(&codes.ids, &scores, k))
}

/// Bytes per encoded vector and per original dimension.
pub fn bytes_per_vector(n_v: usize, n_b: u8) -> f64 {
    (n_v * n_b as usize) as f64 / 8.0
}
