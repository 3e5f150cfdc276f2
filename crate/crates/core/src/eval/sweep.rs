//! Size/accuracy sweeps over index configurations and passage-filtering levels.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::answer::NORMALIZATION_VERSION;
use super::metrics::{evaluate_index, QuerySet, P_AT_K};
use crate::corpus::{EmbeddingMatrix, PassageRecord};
use crate::error::{Error, Result};
use crate::filter::{articles_from_passages, expand_to_passages, filter_corpus, FilterModel};
use crate::index::{build_index, IndexConfig, StorageMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    Flat32,
    Flat16,
    Pq { n_v: usize, n_b: u8 },
    /// PQ with `n_b`-bit codes sized to spend `bits_per_dim` bits per
    /// (reduced) dimension: sub-vectors of `n_b / bits_per_dim` dimensions.
    PqBits { bits_per_dim: u32, n_b: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d_r: Option<usize>,
    pub storage: Storage,
    pub keep_fraction: f64,
    pub normalize: bool,
}

impl SweepConfig {
    pub fn new(d_r: Option<usize>, storage: Storage) -> Self {
        SweepConfig {
            d_r,
            storage,
            keep_fraction: 1.0,
            normalize: false,
        }
    }

    /// 32 → flat32, 16 → flat16, anything else → PQ at that many bits per dimension.
    pub fn for_bits(d_r: Option<usize>, bits_per_dim: u32, n_b: u8) -> Self {
        let storage = match bits_per_dim {
            32 => Storage::Flat32,
            16 => Storage::Flat16,
            b => Storage::PqBits { bits_per_dim: b, n_b },
        };
        Self::new(d_r, storage)
    }

    pub fn with_keep_fraction(mut self, f: f64) -> Self {
        self.keep_fraction = f;
        self
    }

    pub fn index_config(&self, d: usize, seed: u64) -> Result<IndexConfig> {
        let d_r = self.d_r.unwrap_or(d);
        let mut cfg = match self.storage {
            Storage::Flat32 => IndexConfig::flat32(),
            Storage::Flat16 => IndexConfig::flat16(),
            Storage::Pq { n_v, n_b } => IndexConfig::pq(n_v, n_b),
            Storage::PqBits { bits_per_dim, n_b } => {
                if bits_per_dim == 0 || u32::from(n_b) % bits_per_dim != 0 {
                    return Err(Error::param(format!(
                        "{bits_per_dim} bits per dimension is not reachable with {n_b}-bit codes"
                    )));
                }
                let sub_dim = (u32::from(n_b) / bits_per_dim) as usize;
                if !d_r.is_multiple_of(sub_dim) {
                    return Err(Error::param(format!("sub-vector size {sub_dim} does not divide d_R = {d_r}")));
                }
                IndexConfig::pq(d_r / sub_dim, n_b)
            }
        };
        if let Some(d_r) = self.d_r {
            cfg = cfg.with_d_r(d_r);
        }
        Ok(cfg.with_seed(seed).with_normalize(self.normalize))
    }
}

/// Cartesian product of reduced dimensions, bit budgets and keep fractions.
pub fn grid(dims: &[Option<usize>], bits: &[u32], n_b: u8, keep: &[f64]) -> Vec<SweepConfig> {
    let mut out = Vec::new();
    for &d_r in dims {
        for &b in bits {
            for &k in keep {
                out.push(SweepConfig::for_bits(d_r, b, n_b).with_keep_fraction(k));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mode: StorageMode,
    pub d_r: usize,
    pub n_v: usize,
    pub n_b: u8,
    pub bits_per_dim: f64,
    pub passages_kept: usize,
    pub index_bytes: u64,
    pub p_at_k: BTreeMap<usize, f64>,
    pub recall_at_10: f64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub config: SweepConfig,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

/// Everything a sweep evaluates against.
#[derive(Clone, Copy)]
pub struct SweepData<'a> {
    pub passages: &'a EmbeddingMatrix,
    pub passage_records: &'a [PassageRecord],
    pub queries: &'a QuerySet,
    /// Needed only for configurations with `keep_fraction < 1`.
    pub filter: Option<&'a FilterModel>,
}

/// Passages that survive keeping `fraction` of the articles (rounded to the
/// nearest article count).
pub fn filtered_passages(
    passages: &EmbeddingMatrix,
    records: &[PassageRecord],
    filter: Option<&FilterModel>,
    fraction: f64,
) -> Result<EmbeddingMatrix> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param(format!("keep fraction {fraction} not in (0, 1]")));
    }
    if fraction == 1.0 {
        return Ok(passages.clone());
    }
    let model = filter.ok_or_else(|| Error::param("keep fraction below 1 needs a filter model"))?;
    let articles = articles_from_passages(records);
    let keep_count = (fraction * articles.len() as f64).round() as usize;
    let kept = expand_to_passages(records, &filter_corpus(model, &articles, keep_count));
    Ok(passages.retain_ids(|id| kept.contains(id)))
}

pub fn run_config(data: &SweepData<'_>, config: &SweepConfig, seed: u64) -> Result<SweepRow> {
    let start = Instant::now();
    let subset = filtered_passages(data.passages, data.passage_records, data.filter, config.keep_fraction)?;
    if subset.is_empty() {
        return Err(Error::param("no passages left after filtering"));
    }
    let index_config = config.index_config(subset.dim(), seed)?;
    let index = build_index(&subset, &index_config)?;
    let metrics = evaluate_index(&index, &subset, data.queries, data.passage_records)?;
    let layout = index.layout();
    let params = index.params();
    Ok(SweepRow {
        mode: params.mode,
        d_r: params.d_r,
        n_v: params.n_v,
        n_b: params.n_b,
        bits_per_dim: layout.bits_per_dim(),
        passages_kept: params.n,
        index_bytes: metrics.index_bytes,
        p_at_k: metrics.p_at_k,
        recall_at_10: metrics.recall_at_10,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

/// One row per valid configuration, sorted by `(d_R, bits_per_dim,
/// passages_kept)`; invalid configurations are reported, not fatal.
pub fn run_sweep(data: &SweepData<'_>, grid: &[SweepConfig], seed: u64) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::param("sweep grid is empty"));
    }
    let results: Vec<Result<SweepRow>> = grid.par_iter().map(|c| run_config(data, c, seed)).collect();
    let mut outcome = SweepOutcome::default();
    for (config, result) in grid.iter().zip(results) {
        match result {
            Ok(row) => outcome.rows.push(row),
            Err(e) => {
                log::warn!("sweep config {config:?} failed: {e}");
                outcome.failures.push(SweepFailure {
                    config: config.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    outcome.rows.sort_by(|a, b| {
        a.d_r
            .cmp(&b.d_r)
            .then(a.bits_per_dim.total_cmp(&b.bits_per_dim))
            .then(a.passages_kept.cmp(&b.passages_kept))
    });
    Ok(outcome)
}

pub const CSV_COLUMNS: [&str; 14] = [
    "mode", "d_R", "n_v", "n_b", "bits_per_dim", "passages_kept", "index_bytes", "p_at_1", "p_at_5",
    "p_at_10", "p_at_20", "p_at_100", "recall_at_10", "wall_time_ms",
];

/// CSV with a leading `#` comment naming the answer-normalization rules.
pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in rows {
        let mut rec = vec![
            r.mode.name().to_string(),
            r.d_r.to_string(),
            r.n_v.to_string(),
            r.n_b.to_string(),
            r.bits_per_dim.to_string(),
            r.passages_kept.to_string(),
            r.index_bytes.to_string(),
        ];
        rec.extend(P_AT_K.iter().map(|k| r.p_at_k.get(k).copied().unwrap_or(0.0).to_string()));
        rec.push(r.recall_at_10.to_string());
        rec.push(r.wall_time_ms.to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
    format!("# answer-normalization={NORMALIZATION_VERSION}\n{body}")
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Line { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != CSV_COLUMNS {
        return Err(Error::Line {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Line { line: 0, message: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |col: &str| Error::Line {
            line,
            message: format!("bad value in column {col}"),
        };
        macro_rules! field {
            ($i:expr) => {
                rec[$i].parse().map_err(|_| bad(CSV_COLUMNS[$i]))?
            };
        }
        let mode: StorageMode = rec[0].parse().map_err(|_| bad("mode"))?;
        let mut p_at_k = BTreeMap::new();
        for (j, k) in P_AT_K.iter().enumerate() {
            p_at_k.insert(*k, field!(7 + j));
        }
        rows.push(SweepRow {
            mode,
            d_r: field!(1),
            n_v: field!(2),
            n_b: field!(3),
            bits_per_dim: field!(4),
            passages_kept: field!(5),
            index_bytes: field!(6),
            p_at_k,
            recall_at_10: field!(12),
            wall_time_ms: field!(13),
        });
    }
    Ok(rows)
}
