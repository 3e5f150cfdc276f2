//! Seeded synthetic corpora with planted nearest-neighbour structure.
//!
//! Articles are clusters: every article owns a center drawn uniformly from
//! `[-1, 1]^d`, and passage `i` belongs to article `i % n_clusters`. Passages
//! are Gaussian perturbations of their center, queries are perturbations of a
//! source ("gold") passage. All vectors are scaled to unit length so the exact
//! dot-product neighbour of a noise-free query is its own source passage.
//!
//! A configurable fraction of articles is "answerless": their passages carry
//! no answer tokens and no query is drawn from them. Their categories are
//! drawn mostly from a separate pool so a title/category classifier can learn
//! to discard them.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{EmbeddingMatrix, PassageRecord, QueryRecord};
use crate::error::{Error, Result};
use crate::index::exact_oracle_search;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub n_clusters: usize,
    pub noise_sigma: f32,
    pub seed: u64,
    pub n_queries: usize,
    /// Fraction of articles that receive no answers and no queries.
    pub answerless_fraction: f64,
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, n_clusters: usize, noise_sigma: f32, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            n_clusters,
            noise_sigma,
            seed,
            n_queries: n.min(200),
            answerless_fraction: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::param("d must be at least 1"));
        }
        if self.n_clusters == 0 || self.n_clusters > self.n {
            return Err(Error::param(format!(
                "n_clusters must be in 1..={} (got {})",
                self.n, self.n_clusters
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::param("noise_sigma must be a non-negative finite number"));
        }
        if !(0.0..1.0).contains(&self.answerless_fraction) {
            return Err(Error::param("answerless_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub passages: EmbeddingMatrix,
    pub queries: EmbeddingMatrix,
    /// query id → exact dot-product nearest passage id (ties → smaller id).
    pub ground_truth: BTreeMap<String, String>,
    /// query id → passage the query was perturbed from; it holds the answer.
    pub gold: BTreeMap<String, String>,
    pub passage_records: Vec<PassageRecord>,
    pub query_records: Vec<QueryRecord>,
    /// Answer-bearing articles for which `answerless` is false.
    pub answer_articles: Vec<String>,
    pub answerless_articles: Vec<String>,
    /// A seeded half of the answer-bearing articles, standing in for the
    /// articles a retriever hit on training questions.
    pub positive_articles: Vec<String>,
}

const GOOD_CATEGORIES: &[&str] = &[
    "History", "Science", "Geography", "Sports", "Politics", "Music", "Film", "Literature",
];
const NOISE_CATEGORIES: &[&str] = &[
    "Disambiguation pages", "Stub articles", "Lists", "Templates", "User pages", "Redirects",
    "Maintenance", "Drafts",
];
const TITLE_WORDS: &[&str] = &[
    "river", "battle", "empire", "theory", "album", "station", "league", "novel", "island",
    "council", "festival", "bridge", "engine", "temple", "orbit", "valley",
];
const FILLER: &[&str] = &[
    "the", "record", "shows", "that", "early", "sources", "describe", "a", "large", "number",
    "of", "events", "near", "region", "during", "period",
];

fn padded(prefix: char, i: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(6);
    format!("{prefix}{i:0width$}")
}

fn unit_noisy(base: &[f32], sigma: f32, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut v: Vec<f32> = base
        .iter()
        .map(|&c| {
            let z: f32 = rng.sample(StandardNormal);
            c + sigma * z
        })
        .collect();
    let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for x in &mut v {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
    v
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d, k) = (spec.n, spec.d, spec.n_clusters);

    let centers: Vec<f32> = (0..k * d).map(|_| rng.random_range(-1.0f32..=1.0)).collect();

    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut rng);
    let n_answerless = (spec.answerless_fraction * k as f64).floor() as usize;
    let mut answerless = vec![false; k];
    for &c in &order[..n_answerless] {
        answerless[c] = true;
    }

    let article_ids: Vec<String> = (0..k).map(|c| padded('a', c, k)).collect();
    let mut titles = Vec::with_capacity(k);
    let mut categories = Vec::with_capacity(k);
    for c in 0..k {
        let w1 = TITLE_WORDS[rng.random_range(0..TITLE_WORDS.len())];
        let w2 = TITLE_WORDS[rng.random_range(0..TITLE_WORDS.len())];
        titles.push(format!("{} {} {}", capitalize(w1), capitalize(w2), c));
        let (main, other) = if answerless[c] {
            (NOISE_CATEGORIES, GOOD_CATEGORIES)
        } else {
            (GOOD_CATEGORIES, NOISE_CATEGORIES)
        };
        let mut cats = Vec::new();
        for _ in 0..3 {
            let pool = if rng.random_bool(0.9) { main } else { other };
            let cat = pool[rng.random_range(0..pool.len())].to_string();
            if !cats.contains(&cat) {
                cats.push(cat);
            }
        }
        categories.push(cats);
    }

    let mut data = Vec::with_capacity(n * d);
    let mut ids = Vec::with_capacity(n);
    let mut passage_records = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        data.extend(unit_noisy(&centers[c * d..(c + 1) * d], spec.noise_sigma, &mut rng));
        let id = padded('p', i, n);
        let mut words: Vec<&str> = (0..12).map(|_| FILLER[rng.random_range(0..FILLER.len())]).collect();
        let answer = answer_token(i);
        if !answerless[c] {
            words.push("fact");
            words.push(&answer);
        }
        passage_records.push(PassageRecord {
            id: id.clone(),
            article_id: article_ids[c].clone(),
            title: titles[c].clone(),
            text: format!("{}: {}.", titles[c], words.join(" ")),
            categories: categories[c].clone(),
        });
        ids.push(id);
    }
    let passages = EmbeddingMatrix::new(d, data, ids)?;

    let sources: Vec<usize> = (0..n).filter(|&i| !answerless[i % k]).collect();
    let mut qdata = Vec::with_capacity(spec.n_queries * d);
    let mut qids = Vec::with_capacity(spec.n_queries);
    let mut gold = BTreeMap::new();
    let mut query_records = Vec::with_capacity(spec.n_queries);
    for j in 0..spec.n_queries {
        let src = sources[rng.random_range(0..sources.len())];
        qdata.extend(unit_noisy(passages.row(src), spec.noise_sigma, &mut rng));
        let qid = padded('q', j, spec.n_queries);
        gold.insert(qid.clone(), passages.ids()[src].clone());
        query_records.push(QueryRecord {
            id: qid.clone(),
            question: format!("Which fact is recorded about {}?", titles[src % k]),
            answers: vec![answer_token(src)],
        });
        qids.push(qid);
    }
    let queries = EmbeddingMatrix::new(d, qdata, qids)?;

    let ground_truth = queries
        .ids()
        .iter()
        .zip(queries.rows())
        .map(|(qid, q)| {
            let top = exact_oracle_search(&passages, q, 1);
            (qid.clone(), top[0].id.clone())
        })
        .collect();

    let answer_articles: Vec<String> =
        (0..k).filter(|&c| !answerless[c]).map(|c| article_ids[c].clone()).collect();
    let answerless_articles: Vec<String> =
        (0..k).filter(|&c| answerless[c]).map(|c| article_ids[c].clone()).collect();
    let mut positive_articles = answer_articles.clone();
    positive_articles.shuffle(&mut rng);
    positive_articles.truncate(answer_articles.len().div_ceil(2));
    positive_articles.sort();

    Ok(SyntheticCorpus {
        passages,
        queries,
        ground_truth,
        gold,
        passage_records,
        query_records,
        answer_articles,
        answerless_articles,
        positive_articles,
    })
}

fn answer_token(passage: usize) -> String {
    format!("ans{passage}x")
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
