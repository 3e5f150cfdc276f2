//! Article filtering with a linear classifier over hashed title and category
//! features, trained by self-training with mined negatives.

mod features;
mod logreg;

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use features::{featurize, FeatureHasher, SparseFeatures, DEFAULT_HASH_BITS};
pub use logreg::{logistic_loss, train_logreg, train_logreg_traced, LogRegParams, TrainTrace};

use crate::corpus::PassageRecord;
use crate::error::{Error, Result};
use crate::topk;
use crate::util::{self, Reader};

pub const DEFAULT_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterModel {
    pub(crate) hasher: FeatureHasher,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: f64,
    pub(crate) rounds_trained: usize,
}

impl FilterModel {
    pub fn hasher(&self) -> FeatureHasher {
        self.hasher
    }

    pub fn hash_dim(&self) -> usize {
        self.hasher.dim()
    }

    pub fn hash_seed(&self) -> u64 {
        self.hasher.seed()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn rounds_trained(&self) -> usize {
        self.rounds_trained
    }

    /// Pre-sigmoid score.
    pub fn margin(&self, features: &[u32]) -> f64 {
        self.bias + features.iter().map(|&f| self.weights[f as usize]).sum::<f64>()
    }

    pub fn score(&self, article: &Article) -> f64 {
        self.margin(&self.hasher.featurize(&article.title, &article.categories))
    }
}

/// Article-level view of a corpus: filtering decisions are taken per article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub id: String,
    pub title: String,
    pub categories: Vec<String>,
}

/// Groups passages by `article_id` in first-seen order. Title and categories
/// come from the article's first passage.
pub fn articles_from_passages(passages: &[PassageRecord]) -> Vec<Article> {
    let mut seen = HashSet::new();
    passages
        .iter()
        .filter(|p| seen.insert(p.article_id.as_str()))
        .map(|p| Article {
            id: p.article_id.clone(),
            title: p.title.clone(),
            categories: p.categories.clone(),
        })
        .collect()
}

/// Ids of the passages belonging to the given articles.
pub fn expand_to_passages(passages: &[PassageRecord], kept_articles: &[String]) -> HashSet<String> {
    let kept: HashSet<&str> = kept_articles.iter().map(String::as_str).collect();
    passages
        .iter()
        .filter(|p| kept.contains(p.article_id.as_str()))
        .map(|p| p.id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub article_id: String,
    pub score: f64,
    pub keep: bool,
}

pub fn decide(model: &FilterModel, articles: &[Article], threshold: f64) -> Vec<FilterDecision> {
    articles
        .iter()
        .map(|a| {
            let score = model.score(a);
            FilterDecision {
                article_id: a.id.clone(),
                score,
                keep: score >= threshold,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SelfTrainRound {
    pub negatives: Vec<String>,
    pub model: FilterModel,
}

/// Self-training: round one uses uniformly sampled non-positive articles as
/// negatives; each later round retrains from scratch with the non-positives
/// the previous model scored lowest. Positives never change.
pub fn self_train(
    articles: &[Article],
    positive_ids: &[String],
    rounds: usize,
    negatives_per_round: usize,
    seed: u64,
    hasher: FeatureHasher,
    hyper: &LogRegParams,
) -> Result<FilterModel> {
    let history = self_train_rounds(articles, positive_ids, rounds, negatives_per_round, seed, hasher, hyper)?;
    Ok(history.into_iter().last().unwrap().model)
}

/// Like [`self_train`] but returns every round's negatives and model.
pub fn self_train_rounds(
    articles: &[Article],
    positive_ids: &[String],
    rounds: usize,
    negatives_per_round: usize,
    seed: u64,
    hasher: FeatureHasher,
    hyper: &LogRegParams,
) -> Result<Vec<SelfTrainRound>> {
    if rounds == 0 {
        return Err(Error::param("self-training needs at least one round"));
    }
    if negatives_per_round == 0 {
        return Err(Error::param("negatives_per_round must be positive"));
    }
    let known: HashSet<&str> = articles.iter().map(|a| a.id.as_str()).collect();
    let positives: BTreeSet<&str> = positive_ids.iter().map(String::as_str).collect();
    if let Some(missing) = positives.iter().find(|p| !known.contains(**p)) {
        return Err(Error::UnknownId(missing.to_string()));
    }

    let feats: Vec<SparseFeatures> = articles.iter().map(|a| hasher.featurize(&a.title, &a.categories)).collect();
    let pos: Vec<SparseFeatures> = articles
        .iter()
        .zip(&feats)
        .filter(|(a, _)| positives.contains(a.id.as_str()))
        .map(|(_, f)| f.clone())
        .collect();
    let pool: Vec<usize> = (0..articles.len())
        .filter(|&i| !positives.contains(articles[i].id.as_str()))
        .collect();
    if pos.is_empty() || pool.is_empty() {
        return Err(Error::param("self-training needs both positive and non-positive articles"));
    }
    let take = negatives_per_round.min(pool.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = index::sample(&mut rng, pool.len(), take)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    chosen.sort_unstable();

    let mut out: Vec<SelfTrainRound> = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        if let Some(prev) = out.last() {
            let mut scored: Vec<(usize, f64)> = pool.iter().map(|&i| (i, prev.model.margin(&feats[i]))).collect();
            // lowest margin first, ties → smaller id
            scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| articles[a.0].id.cmp(&articles[b.0].id)));
            chosen = scored.into_iter().take(take).map(|(i, _)| i).collect();
        }
        let neg: Vec<SparseFeatures> = chosen.iter().map(|&i| feats[i].clone()).collect();
        let mut model = train_logreg(&pos, &neg, hasher, hyper)?;
        model.rounds_trained = round;
        out.push(SelfTrainRound {
            negatives: chosen.iter().map(|&i| articles[i].id.clone()).collect(),
            model,
        });
    }
    Ok(out)
}

/// The `keep_count` highest-scoring article ids, best first (ties → smaller id).
pub fn filter_corpus(model: &FilterModel, articles: &[Article], keep_count: usize) -> Vec<String> {
    let ids: Vec<String> = articles.iter().map(|a| a.id.clone()).collect();
    let scores: Vec<f64> = articles.iter().map(|a| model.score(a)).collect();
    topk::top_k(&ids, &scores, keep_count).into_iter().map(|h| h.id).collect()
}

const FILTER_FORMAT: &str = "slimdex-filter";
const FILTER_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct FilterHeader {
    format: String,
    version: u32,
    hash_dim: usize,
    hash_seed: u64,
    rounds: usize,
    nnz: usize,
}

impl FilterModel {
    /// One JSON header line, then `bias: f64` and `nnz × (index: u32, weight: f64)`
    /// in ascending index order, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nonzero: Vec<(u32, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, &w)| (i as u32, w))
            .collect();
        let header = FilterHeader {
            format: FILTER_FORMAT.to_string(),
            version: FILTER_VERSION,
            hash_dim: self.hash_dim(),
            hash_seed: self.hash_seed(),
            rounds: self.rounds_trained,
            nnz: nonzero.len(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.extend_from_slice(&self.bias.to_le_bytes());
        for (i, w) in nonzero {
            out.extend_from_slice(&i.to_le_bytes());
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let nl = buf
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(0, "missing JSON header line"))?;
        let header: FilterHeader =
            serde_json::from_slice(&buf[..nl]).map_err(|e| Error::format(0, format!("bad header: {e}")))?;
        if header.format != FILTER_FORMAT || header.version != FILTER_VERSION {
            return Err(Error::format(0, format!("unsupported filter format {} v{}", header.format, header.version)));
        }
        let hasher = FeatureHasher::new(header.hash_dim, header.hash_seed)
            .map_err(|e| Error::format(0, e.to_string()))?;
        let base = nl as u64 + 1;
        let mut r = Reader::new(&buf[nl + 1..]);
        let bias = f64::from_le_bytes(r.take(8, "bias")?.try_into().unwrap());
        let mut weights = vec![0f64; header.hash_dim];
        let mut last: Option<u32> = None;
        for _ in 0..header.nnz {
            let at = base + r.offset();
            let i = r.u32("weight index")?;
            let w = f64::from_le_bytes(r.take(8, "weight")?.try_into().unwrap());
            if i as usize >= header.hash_dim || last.is_some_and(|l| l >= i) {
                return Err(Error::format(at, format!("weight index {i} out of order or range")));
            }
            if !w.is_finite() {
                return Err(Error::format(at + 4, "non-finite weight"));
            }
            weights[i as usize] = w;
            last = Some(i);
        }
        if !bias.is_finite() {
            return Err(Error::format(base, "non-finite bias"));
        }
        if r.remaining() != 0 {
            return Err(Error::format(base + r.offset(), "trailing bytes after weights"));
        }
        Ok(FilterModel {
            hasher,
            weights,
            bias,
            rounds_trained: header.rounds,
        })
    }
}

pub fn save_filter(model: &FilterModel, path: &Path) -> Result<()> {
    util::write_atomic(path, &model.to_bytes())
}

pub fn load_filter(path: &Path) -> Result<FilterModel> {
    FilterModel::from_bytes(&util::read_file(path)?)
}
