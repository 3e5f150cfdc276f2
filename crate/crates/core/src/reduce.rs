//! Dimension reduction: PCA fitted on already trained embeddings, plus a
//! layer-style normalization of the reduced vectors.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f32 = 1e-5;

/// Mean and orthonormal projection onto the top `d_r` principal directions.
///
/// Stored in f32 so that an index file round-trips it bit-exactly; all
/// arithmetic widens to f64.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    d: usize,
    d_r: usize,
    mean: Vec<f32>,
    components: Vec<f32>,
    eigenvalues: Vec<f32>,
}

impl PcaModel {
    pub fn from_parts(
        d: usize,
        d_r: usize,
        mean: Vec<f32>,
        components: Vec<f32>,
        eigenvalues: Vec<f32>,
    ) -> Result<Self> {
        if d_r == 0 || d_r > d {
            return Err(Error::param(format!("PCA output dimension {d_r} not in 1..={d}")));
        }
        if mean.len() != d || components.len() != d_r * d || eigenvalues.len() != d_r {
            return Err(Error::param("PCA block lengths do not match dimensions"));
        }
        Ok(PcaModel {
            d,
            d_r,
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn output_dim(&self) -> usize {
        self.d_r
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    /// Row-major `d_r × d`.
    pub fn components(&self) -> &[f32] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &[f32] {
        &self.components[i * self.d..(i + 1) * self.d]
    }

    pub fn eigenvalues(&self) -> &[f32] {
        &self.eigenvalues
    }

    pub fn project(&self, x: &[f32]) -> Result<Vec<f32>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: x.len(),
            });
        }
        Ok(self
            .components
            .chunks_exact(self.d)
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(&w, (&xi, &mi))| f64::from(w) * (f64::from(xi) - f64::from(mi)))
                    .sum::<f64>() as f32
            })
            .collect())
    }

    /// `mean + componentsᵀ · y`
    pub fn reconstruct(&self, y: &[f32]) -> Result<Vec<f32>> {
        if y.len() != self.d_r {
            return Err(Error::DimensionMismatch {
                expected: self.d_r,
                actual: y.len(),
            });
        }
        let mut out: Vec<f64> = self.mean.iter().map(|&m| f64::from(m)).collect();
        for (c, &yi) in self.components.chunks_exact(self.d).zip(y) {
            for (o, &w) in out.iter_mut().zip(c) {
                *o += f64::from(w) * f64::from(yi);
            }
        }
        Ok(out.into_iter().map(|v| v as f32).collect())
    }
}

/// Fits PCA by eigendecomposition of the population covariance (divisor `n`).
pub fn fit_pca(x: &EmbeddingMatrix, d_r: usize) -> Result<PcaModel> {
    let (n, d) = (x.len(), x.dim());
    if d_r == 0 || d_r > d {
        return Err(Error::param(format!("reduced dimension {d_r} not in 1..={d}")));
    }
    if n < 2 {
        return Err(Error::param(format!("PCA needs at least 2 vectors, got {n}")));
    }

    let mut mean = vec![0f64; d];
    for row in x.rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += f64::from(v);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0f64; d];
    for row in x.rows() {
        for ((c, &v), &m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = f64::from(v) - m;
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(d_r * d);
    let mut eigenvalues = Vec::with_capacity(d_r);
    for &col in &order[..d_r] {
        let v = eig.eigenvectors.column(col);
        // sign convention: largest-magnitude entry positive (first on ties)
        let mut pivot = 0;
        for i in 1..d {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        components.extend(v.iter().map(|&e| (sign * e) as f32));
        eigenvalues.push(eig.eigenvalues[col].max(0.0) as f32);
    }

    Ok(PcaModel {
        d,
        d_r,
        mean: mean.into_iter().map(|m| m as f32).collect(),
        components,
        eigenvalues,
    })
}

pub fn apply_pca(model: &PcaModel, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if x.dim() != model.d {
        return Err(Error::DimensionMismatch {
            expected: model.d,
            actual: x.dim(),
        });
    }
    let mut data = Vec::with_capacity(x.len() * model.d_r);
    for row in x.rows() {
        data.extend(model.project(row)?);
    }
    EmbeddingMatrix::new(model.d_r, data, x.ids().to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationParams {
    pub gain: Vec<f32>,
    pub bias: Vec<f32>,
    pub epsilon: f32,
}

impl NormalizationParams {
    /// Identity affine part: gain 1, bias 0.
    pub fn identity(dim: usize) -> Self {
        NormalizationParams {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn dim(&self) -> usize {
        self.gain.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.gain.len() != self.bias.len() || self.gain.is_empty() {
            return Err(Error::param("normalization gain and bias must be non-empty and equal length"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("normalization epsilon must be positive"));
        }
        Ok(())
    }
}

/// `gain_i · (y_i − mean(y)) / sqrt(var(y) + epsilon) + bias_i`, with the
/// population variance.
pub fn layer_normalize(y: &[f32], p: &NormalizationParams) -> Vec<f32> {
    debug_assert_eq!(y.len(), p.gain.len());
    let n = y.len() as f64;
    let mean = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = y.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + f64::from(p.epsilon)).sqrt();
    y.iter()
        .zip(p.gain.iter().zip(&p.bias))
        .map(|(&v, (&g, &b))| (f64::from(g) * (f64::from(v) - mean) * inv + f64::from(b)) as f32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: &[Vec<f32>]) -> EmbeddingMatrix {
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        EmbeddingMatrix::from_rows(rows, ids).unwrap()
    }

    #[test]
    fn points_on_a_line() {
        let x = matrix(&[vec![-2.0, -4.0], vec![-1.0, -2.0], vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 6.0]]);
        let m = fit_pca(&x, 2).unwrap();
        let s5 = 5f32.sqrt();
        let c0 = m.component(0);
        assert!((c0[0] - 1.0 / s5).abs() < 1e-6 && (c0[1] - 2.0 / s5).abs() < 1e-6, "{c0:?}");
        assert!(m.eigenvalues()[1].abs() < 1e-6);
    }

    #[test]
    fn full_rank_reconstructs() {
        let x = matrix(&[
            vec![1.0, 2.0, 0.5],
            vec![-1.0, 0.3, 2.0],
            vec![0.2, -0.7, 1.1],
            vec![3.0, 1.0, -2.0],
        ]);
        let m = fit_pca(&x, 3).unwrap();
        let y = apply_pca(&m, &x).unwrap();
        for (orig, red) in x.rows().zip(y.rows()) {
            let back = m.reconstruct(red).unwrap();
            let err: f32 = orig.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(err <= 1e-6, "{err}");
            for (a, b) in orig.iter().zip(&back) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn mean_maps_to_zero() {
        let x = matrix(&[vec![1.0, 2.0], vec![3.0, 5.0], vec![-1.0, 0.0]]);
        let m = fit_pca(&x, 2).unwrap();
        let y = m.project(&m.mean().to_vec()).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn errors() {
        let x = matrix(&[vec![1.0, 2.0], vec![3.0, 5.0]]);
        assert!(fit_pca(&x, 3).is_err());
        assert!(fit_pca(&matrix(&[vec![1.0, 2.0]]), 1).is_err());
        let m = fit_pca(&x, 1).unwrap();
        let wrong = matrix(&[vec![1.0, 2.0, 3.0]]);
        assert!(matches!(apply_pca(&m, &wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rank_deficient_gives_zero_eigenvalues() {
        let x = matrix(&[vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0], vec![3.0, 3.0, 3.0]]);
        let m = fit_pca(&x, 3).unwrap();
        assert!(m.eigenvalues()[1].abs() < 1e-6 && m.eigenvalues()[2].abs() < 1e-6);
    }

    #[test]
    fn layer_norm_constant_is_zero() {
        let out = layer_normalize(&[4.0; 5], &NormalizationParams::identity(5));
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn layer_norm_unit_pair() {
        let mut p = NormalizationParams::identity(2);
        p.epsilon = 1e-12;
        let out = layer_normalize(&[1.0, -1.0], &p);
        assert!((out[0] - 1.0).abs() < 1e-6 && (out[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn layer_norm_one_two_three() {
        let out = layer_normalize(&[1.0, 2.0, 3.0], &NormalizationParams::identity(3));
        // direct evaluation: mean 2, population variance 2/3
        let s = (2.0f64 / 3.0 + 1e-5).sqrt();
        let expect = [-1.0 / s, 0.0, 1.0 / s];
        for (o, e) in out.iter().zip(expect) {
            assert!((f64::from(*o) - e).abs() < 1e-6);
        }
        let mean: f64 = out.iter().map(|&v| f64::from(v)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn layer_norm_shift_invariant(
            y in prop::collection::vec(-640i32..640, 2..16),
            shift in -100i32..100,
        ) {
            // eighths plus integer shifts stay exact in f32
            let y: Vec<f32> = y.into_iter().map(|v| v as f32 / 8.0).collect();
            let p = NormalizationParams::identity(y.len());
            let a = layer_normalize(&y, &p);
            let shifted: Vec<f32> = y.iter().map(|v| v + shift as f32).collect();
            let b = layer_normalize(&shifted, &p);
            for (x, z) in a.iter().zip(&b) {
                prop_assert!((x - z).abs() <= 1e-6);
            }
        }
    }
}
