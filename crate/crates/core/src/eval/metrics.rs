use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::answer::answer_match;
use crate::corpus::{EmbeddingMatrix, PassageRecord, QueryRecord};
use crate::error::{Error, Result};
use crate::index::{exact_oracle_search, IndexArtifact};
use crate::topk::Hit;

/// The top-k cut-offs reported everywhere.
pub const P_AT_K: [usize; 5] = [1, 5, 10, 20, 100];
pub const RECALL_K: usize = 10;

/// Query records paired with their embeddings (matched by id).
#[derive(Debug, Clone)]
pub struct QuerySet {
    records: Vec<QueryRecord>,
    vectors: Vec<Vec<f32>>,
}

impl QuerySet {
    pub fn new(records: Vec<QueryRecord>, embeddings: &EmbeddingMatrix) -> Result<Self> {
        let by_id: HashMap<&str, usize> = embeddings.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let vectors = records
            .iter()
            .map(|r| {
                by_id
                    .get(r.id.as_str())
                    .map(|&i| embeddings.row(i).to_vec())
                    .ok_or_else(|| Error::UnknownId(format!("query {} has no embedding", r.id)))
            })
            .collect::<Result<_>>()?;
        Ok(QuerySet { records, vectors })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i]
    }
}

/// Passage lookup by id.
pub struct PassageStore<'a> {
    by_id: HashMap<&'a str, &'a PassageRecord>,
}

impl<'a> PassageStore<'a> {
    pub fn new(passages: &'a [PassageRecord]) -> Self {
        PassageStore {
            by_id: passages.iter().map(|p| (p.id.as_str(), p)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Result<&'a PassageRecord> {
        self.by_id.get(id).copied().ok_or_else(|| Error::UnknownId(id.to_string()))
    }
}

pub fn retrieve(index: &IndexArtifact, queries: &QuerySet, k: usize) -> Result<Vec<Vec<Hit>>> {
    (0..queries.len()).map(|i| index.search(queries.vector(i), k)).collect()
}

/// Fraction of queries with an answer-bearing passage among the first `k` hits.
pub fn precision_from_results(
    results: &[Vec<Hit>],
    queries: &QuerySet,
    passages: &PassageStore<'_>,
    k: usize,
) -> Result<f64> {
    if queries.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (res, q) in results.iter().zip(queries.records()) {
        let mut found = false;
        for h in res.iter().take(k) {
            if answer_match(&passages.get(&h.id)?.text, &q.answers) {
                found = true;
                break;
            }
        }
        hits += usize::from(found);
    }
    Ok(hits as f64 / queries.len() as f64)
}

pub fn precision_at_k(
    index: &IndexArtifact,
    queries: &QuerySet,
    passages: &[PassageRecord],
    k: usize,
) -> Result<f64> {
    let results = retrieve(index, queries, k)?;
    precision_from_results(&results, queries, &PassageStore::new(passages), k)
}

/// Mean over queries of `|top-k(approx) ∩ top-k(oracle)| / k`, where `k` is
/// capped by the oracle's list length (an index smaller than `k` can still
/// reach 1.0).
pub fn recall_vs_exact(approx: &[Vec<Hit>], oracle: &[Vec<Hit>], k: usize) -> f64 {
    if oracle.is_empty() {
        return 1.0;
    }
    let total: f64 = approx
        .iter()
        .zip(oracle)
        .map(|(a, o)| {
            let kk = k.min(o.len());
            if kk == 0 {
                return 1.0;
            }
            let truth: HashSet<&str> = o.iter().take(kk).map(|h| h.id.as_str()).collect();
            let overlap = a.iter().take(kk).filter(|h| truth.contains(h.id.as_str())).count();
            overlap as f64 / kk as f64
        })
        .sum();
    total / oracle.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub p_at_k: BTreeMap<usize, f64>,
    pub recall_at_10: f64,
    pub index_bytes: u64,
}

/// P@k for every k in [`P_AT_K`] and recall@10 against exhaustive search over
/// `exact` (the uncompressed vectors of the passages the index holds).
pub fn evaluate_index(
    index: &IndexArtifact,
    exact: &EmbeddingMatrix,
    queries: &QuerySet,
    passages: &[PassageRecord],
) -> Result<EvalMetrics> {
    let max_k = *P_AT_K.iter().max().unwrap();
    let results = retrieve(index, queries, max_k)?;
    let store = PassageStore::new(passages);
    let mut p_at_k = BTreeMap::new();
    for k in P_AT_K {
        p_at_k.insert(k, precision_from_results(&results, queries, &store, k)?);
    }
    let oracle: Vec<Vec<Hit>> = (0..queries.len())
        .map(|i| exact_oracle_search(exact, queries.vector(i), RECALL_K))
        .collect();
    Ok(EvalMetrics {
        p_at_k,
        recall_at_10: recall_vs_exact(&results, &oracle, RECALL_K),
        index_bytes: index.size_report().total_bytes,
    })
}
