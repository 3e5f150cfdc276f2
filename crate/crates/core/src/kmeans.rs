//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 25;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct KMeans {
    /// Row-major `k × dim`.
    pub centroids: Vec<f32>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each point to its assigned centroid.
    pub objective: f64,
    /// Objective after every assignment step, ending with the final value.
    pub history: Vec<f64>,
}

impl KMeans {
    pub fn centroid(&self, c: usize, dim: usize) -> &[f32] {
        &self.centroids[c * dim..(c + 1) * dim]
    }
}

pub fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

/// Index of the nearest centroid; ties go to the lower index.
pub fn nearest(point: &[f32], centroids: &[f32], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

pub fn kmeans_fit(points: &[f32], dim: usize, k: usize, max_iter: usize, seed: u64) -> Result<KMeans> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kmeans_fit_with(points, dim, k, max_iter, DEFAULT_TOLERANCE, &mut rng)
}

pub fn kmeans_fit_with<R: Rng>(
    points: &[f32],
    dim: usize,
    k: usize,
    max_iter: usize,
    tol: f64,
    rng: &mut R,
) -> Result<KMeans> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::param("points length is not a multiple of dim"));
    }
    let n = points.len() / dim;
    if n == 0 {
        return Err(Error::param("k-means needs at least one point"));
    }
    if k == 0 || k > n {
        return Err(Error::param(format!("k = {k} must be in 1..={n}")));
    }
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut centroids = plus_plus_init(points, dim, k, rng);
    let mut assignments = vec![0usize; n];
    let mut dists = vec![0f64; n];
    let mut objective = assign(points, dim, &centroids, &mut assignments, &mut dists);
    let mut history = vec![objective];

    for _ in 0..max_iter {
        update_means(points, dim, k, &assignments, &mut centroids);

        // Re-seed empty clusters from the points worst served by their centroid.
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        if counts.contains(&0) {
            let mut far: Vec<f64> = (0..n)
                .map(|i| sq_dist(point(i), &centroids[assignments[i] * dim..(assignments[i] + 1) * dim]))
                .collect();
            for c in (0..k).filter(|&c| counts[c] == 0) {
                let mut pick = 0;
                for i in 1..n {
                    if far[i] > far[pick] {
                        pick = i;
                    }
                }
                centroids[c * dim..(c + 1) * dim].copy_from_slice(point(pick));
                far[pick] = -1.0;
            }
        }

        let previous = assignments.clone();
        let next = assign(points, dim, &centroids, &mut assignments, &mut dists);
        history.push(next);
        let converged = previous == assignments || objective - next <= tol * objective;
        objective = next;
        if converged {
            break;
        }
    }

    // Final centroids are the means of the final assignment.
    update_means(points, dim, k, &assignments, &mut centroids);
    objective = (0..n)
        .map(|i| sq_dist(point(i), &centroids[assignments[i] * dim..(assignments[i] + 1) * dim]))
        .sum();
    history.push(objective);

    Ok(KMeans {
        centroids,
        assignments,
        objective,
        history,
    })
}

fn plus_plus_init<R: Rng>(points: &[f32], dim: usize, k: usize, rng: &mut R) -> Vec<f32> {
    let n = points.len() / dim;
    let point = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(point(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(first))).collect();

    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                if acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target ≥ acc; fall back to the last weighted point
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        let c = point(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(point(i), &c));
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

fn assign(points: &[f32], dim: usize, centroids: &[f32], assignments: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (i, p) in points.chunks_exact(dim).enumerate() {
        let (c, d) = nearest(p, centroids, dim);
        assignments[i] = c;
        dists[i] = d;
        total += d;
    }
    total
}

/// Replaces every non-empty cluster's centroid by its members' mean.
fn update_means(points: &[f32], dim: usize, k: usize, assignments: &[usize], centroids: &mut [f32]) {
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.chunks_exact(dim).zip(assignments) {
        counts[a] += 1;
        for (s, &v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p) {
            *s += f64::from(v);
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            continue;
        }
        for j in 0..dim {
            centroids[c * dim + j] = (sums[c * dim + j] / counts[c] as f64) as f32;
        }
    }
}
