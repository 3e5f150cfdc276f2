//! L2-regularized binary logistic regression over sparse indicator features,
//! trained by full-batch gradient descent with step halving.

use std::collections::HashMap;

use super::features::{FeatureHasher, SparseFeatures};
use super::FilterModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegParams {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            l2: 1e-4,
            lr: 0.5,
            epochs: 200,
        }
    }
}

const MAX_HALVINGS: usize = 40;

/// `log(1 + exp(-z))` without overflow.
fn softplus_neg(z: f64) -> f64 {
    (-z).max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Examples re-indexed into the compact set of features that actually occur.
struct Problem {
    rows: Vec<Vec<usize>>,
    labels: Vec<f64>,
    n_features: usize,
}

impl Problem {
    fn margin(&self, i: usize, w: &[f64], b: f64) -> f64 {
        b + self.rows[i].iter().map(|&f| w[f]).sum::<f64>()
    }

    /// mean logistic loss + (l2 / 2)·‖w‖²
    fn loss(&self, w: &[f64], b: f64, l2: f64) -> f64 {
        let n = self.rows.len() as f64;
        let data: f64 = (0..self.rows.len())
            .map(|i| softplus_neg(self.labels[i] * self.margin(i, w, b)))
            .sum();
        data / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], b: f64, l2: f64) -> (Vec<f64>, f64) {
        let n = self.rows.len() as f64;
        let mut gw: Vec<f64> = w.iter().map(|&v| l2 * v).collect();
        let mut gb = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let y = self.labels[i];
            // d/dm log(1 + exp(-y m)) = -y σ(-y m)
            let g = -y * sigmoid(-y * self.margin(i, w, b)) / n;
            gb += g;
            for &f in row {
                gw[f] += g;
            }
        }
        (gw, gb)
    }
}

/// Result of a training run, with the per-epoch loss trace.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub model: FilterModel,
    /// Loss before the first epoch followed by the loss after each epoch.
    pub losses: Vec<f64>,
}

pub fn train_logreg(
    pos: &[SparseFeatures],
    neg: &[SparseFeatures],
    hasher: FeatureHasher,
    hyper: &LogRegParams,
) -> Result<FilterModel> {
    Ok(train_logreg_traced(pos, neg, hasher, hyper)?.model)
}

pub fn train_logreg_traced(
    pos: &[SparseFeatures],
    neg: &[SparseFeatures],
    hasher: FeatureHasher,
    hyper: &LogRegParams,
) -> Result<TrainTrace> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::param("logistic regression needs at least one positive and one negative"));
    }
    if !(hyper.lr > 0.0) || !(hyper.l2 >= 0.0) {
        return Err(Error::param("lr must be positive and l2 non-negative"));
    }

    let mut compact: HashMap<u32, usize> = HashMap::new();
    let mut global: Vec<u32> = Vec::new();
    let mut rows = Vec::with_capacity(pos.len() + neg.len());
    let mut labels = Vec::with_capacity(pos.len() + neg.len());
    for (set, y) in [(pos, 1.0), (neg, -1.0)] {
        for feats in set {
            let row = feats
                .iter()
                .map(|&f| {
                    if f as usize >= hasher.dim() {
                        return Err(Error::param(format!("feature {f} outside hash_dim {}", hasher.dim())));
                    }
                    Ok(*compact.entry(f).or_insert_with(|| {
                        global.push(f);
                        global.len() - 1
                    }))
                })
                .collect::<Result<Vec<usize>>>()?;
            rows.push(row);
            labels.push(y);
        }
    }
    let problem = Problem {
        rows,
        labels,
        n_features: global.len(),
    };

    let mut w = vec![0f64; problem.n_features];
    let mut b = 0f64;
    let mut loss = problem.loss(&w, b, hyper.l2);
    let mut losses = vec![loss];
    'epochs: for _ in 0..hyper.epochs {
        let (gw, gb) = problem.gradient(&w, b, hyper.l2);
        let mut step = hyper.lr;
        for _ in 0..MAX_HALVINGS {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(v, g)| v - step * g).collect();
            let cand_b = b - step * gb;
            let cand_loss = problem.loss(&cand_w, cand_b, hyper.l2);
            if cand_loss <= loss {
                w = cand_w;
                b = cand_b;
                loss = cand_loss;
                losses.push(loss);
                continue 'epochs;
            }
            step *= 0.5;
        }
        // no step size decreases the loss any further
        losses.push(loss);
        break;
    }

    let mut weights = vec![0f64; hasher.dim()];
    for (c, &g) in global.iter().enumerate() {
        weights[g as usize] = w[c];
    }
    Ok(TrainTrace {
        model: FilterModel {
            hasher,
            weights,
            bias: b,
            rounds_trained: 1,
        },
        losses,
    })
}

/// Mean logistic loss plus L2 penalty of `model` on a labelled set, over the
/// full feature space.
pub fn logistic_loss(model: &FilterModel, pos: &[SparseFeatures], neg: &[SparseFeatures], l2: f64) -> f64 {
    let n = (pos.len() + neg.len()) as f64;
    let data: f64 = pos.iter().map(|f| softplus_neg(model.margin(f))).sum::<f64>()
        + neg.iter().map(|f| softplus_neg(-model.margin(f))).sum::<f64>();
    data / n + 0.5 * l2 * model.weights.iter().map(|v| v * v).sum::<f64>()
}
