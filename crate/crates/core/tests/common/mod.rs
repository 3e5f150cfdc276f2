#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slimdex::corpus::EmbeddingMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
    let mut r = rng(seed);
    let data = (0..n * d).map(|_| r.random_range(-1.0f32..1.0)).collect();
    EmbeddingMatrix::new(d, data, (0..n).map(|i| format!("v{i:04}")).collect()).unwrap()
}

pub fn random_vector(d: usize, r: &mut ChaCha8Rng) -> Vec<f32> {
    (0..d).map(|_| r.random_range(-1.0f32..1.0)).collect()
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..a.len() {
        s += a[i] as f64 * b[i] as f64;
    }
    s
}

/// Scores every row, then sorts the whole list: descending score, smaller id first on ties.
pub fn brute_force(ids: &[String], rows: &[Vec<f32>], q: &[f32], k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = ids.iter().cloned().zip(rows.iter().map(|r| dot(r, q))).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub fn rows_of(m: &EmbeddingMatrix) -> Vec<Vec<f32>> {
    (0..m.len()).map(|i| m.row(i).to_vec()).collect()
}

/// Within-cluster sum of squares of the 2-way split selected by `mask`.
pub fn sse(points: &[[f64; 2]], mask: u32) -> f64 {
    let mut total = 0.0;
    for side in [0u32, 1] {
        let members: Vec<&[f64; 2]> = points.iter().enumerate().filter(|(i, _)| (mask >> i) & 1 == side).map(|(_, p)| p).collect();
        if members.is_empty() {
            return f64::INFINITY;
        }
        let m = members.len() as f64;
        let cx = members.iter().map(|p| p[0]).sum::<f64>() / m;
        let cy = members.iter().map(|p| p[1]).sum::<f64>() / m;
        total += members.iter().map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sum::<f64>();
    }
    total
}

/// Two groups of three points around random centers; integer coordinates keep
/// every value exact in f32.
pub fn six_points(seed: u64) -> Vec<[f64; 2]> {
    let mut r = rng(seed);
    let mut pts = Vec::with_capacity(6);
    for _ in 0..2 {
        let (cx, cy) = (r.random_range(-10..=10), r.random_range(-10..=10));
        for _ in 0..3 {
            pts.push([(cx + r.random_range(-3..=3)) as f64, (cy + r.random_range(-3..=3)) as f64]);
        }
    }
    pts
}

pub fn small_fixture(seed: u64) -> Vec<Vec<f32>> {
    let mut r = rng(seed);
    let n = r.random_range(2..=6);
    let d = r.random_range(1..=3);
    (0..n).map(|_| random_vector(d, &mut r)).collect()
}

pub fn residual_along(rows: &[Vec<f32>], dir: &[f64]) -> f64 {
    let d = dir.len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j] as f64).sum::<f64>() / n).collect();
    rows.iter()
        .map(|r| {
            let c: Vec<f64> = (0..d).map(|j| r[j] as f64 - mean[j]).collect();
            let t: f64 = c.iter().zip(dir).map(|(a, b)| a * b).sum();
            c.iter().zip(dir).map(|(a, b)| (a - t * b).powi(2)).sum::<f64>()
        })
        .sum()
}
