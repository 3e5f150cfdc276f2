use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// A scored passage id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub score: f64,
}

/// Descending score, then ascending id.
pub fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Top `k` of `scores` (aligned with `ids`); returns everything when `k ≥ n`.
pub fn top_k(ids: &[String], scores: &[f64], k: usize) -> Vec<Hit> {
    debug_assert_eq!(ids.len(), scores.len());
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let cmp = |&a: &usize, &b: &usize| rank_order((&ids[a], scores[a]), (&ids[b], scores[b]));
    let k = k.min(order.len());
    if k == 0 {
        return Vec::new();
    }
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    order
        .into_iter()
        .map(|i| Hit {
            id: ids[i].clone(),
            score: scores[i],
        })
        .collect()
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}
