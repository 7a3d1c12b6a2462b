//! Instruction-aligned saliency from visual token features and a text embedding.

use crate::error::{Error, Result};
use crate::types::{minmax_normalize, ScalarGrid, ScoreVector, TokenGrid};

/// `N x D` token features, row-major, bound to a token grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    grid: TokenGrid,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(grid: TokenGrid, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("feature dimension must be at least 1".into()));
        }
        if data.len() != grid.total() * dim {
            return Err(Error::Shape(format!(
                "feature matrix for grid {grid} with D={dim} needs {} values, got {}",
                grid.total() * dim,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature at token {}, dim {}",
                i / dim,
                i % dim
            )));
        }
        Ok(Self { grid, dim, data })
    }

    pub fn grid(&self) -> TokenGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tokens(&self) -> usize {
        self.grid.total()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, token: usize) -> &[f64] {
        &self.data[token * self.dim..(token + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub(crate) fn same_shape(&self, other: &FeatureMatrix) -> bool {
        self.grid.same_layout(&other.grid) && self.dim == other.dim
    }
}

/// Instruction embedding of dimension `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding(Vec<f64>);

impl TextEmbedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("text embedding is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite text embedding".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Unit-L2 copy; the zero vector stays zero.
    pub fn normalized(&self) -> TextEmbedding {
        TextEmbedding(l2_normalized(&self.0))
    }
}

fn l2_normalized(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / norm).collect()
    }
}

/// Subtract the per-dimension mean over tokens, then scale each row to unit norm.
///
/// Rows that are exactly zero after centering are left as zero.
pub fn center_l2_normalize(feats: &FeatureMatrix) -> FeatureMatrix {
    let d = feats.dim;
    let n = feats.tokens();
    let first = feats.row(0);
    let mut sums = vec![0.0; d];
    let mut constant = vec![true; d];
    for row in feats.rows() {
        for j in 0..d {
            sums[j] += row[j];
            constant[j] &= row[j] == first[j];
        }
    }
    // Constant columns are centered exactly; a computed mean could carry rounding residue.
    let means: Vec<f64> = (0..d)
        .map(|j| {
            if constant[j] {
                first[j]
            } else {
                sums[j] / n as f64
            }
        })
        .collect();

    let mut data = Vec::with_capacity(feats.data.len());
    for row in feats.rows() {
        let centered: Vec<f64> = row.iter().zip(&means).map(|(x, m)| x - m).collect();
        data.extend(l2_normalized(&centered));
    }
    FeatureMatrix {
        grid: feats.grid,
        dim: d,
        data,
    }
}

/// Temperature-scaled softmax of token/text cosine similarities.
pub fn cross_modal_softmax(
    feats: &FeatureMatrix,
    text: &TextEmbedding,
    tau: f64,
) -> Result<ScoreVector> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::config("tau", format!("must be positive, got {tau}")));
    }
    if text.dim() != feats.dim {
        return Err(Error::Shape(format!(
            "text embedding has D={}, features have D={}",
            text.dim(),
            feats.dim
        )));
    }
    let x = center_l2_normalize(feats);
    let e = text.normalized();
    let logits: Vec<f64> = x
        .rows()
        .map(|row| row.iter().zip(e.values()).map(|(a, b)| a * b).sum::<f64>() / tau)
        .collect();
    ScoreVector::new(feats.grid, softmax(&logits))
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / total).collect()
}

/// Stride-1 box filter over the token grid with replicate padding.
pub fn spatial_avg_pool(scores: &ScoreVector, window: usize) -> Result<ScoreVector> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::config(
            "pool_window",
            format!("must be a positive odd integer, got {window}"),
        ));
    }
    let grid = scores.grid();
    let m = scores.to_grid();
    let half = (window / 2) as isize;
    let area = (window * window) as f64;
    let mut out = Vec::with_capacity(grid.total());
    for r in 0..grid.rows() as isize {
        for c in 0..grid.cols() as isize {
            let mut sum = 0.0;
            for dr in -half..=half {
                for dc in -half..=half {
                    sum += m.get_clamped(r + dr, c + dc);
                }
            }
            out.push(sum / area);
        }
    }
    ScalarGrid::new(grid.rows(), grid.cols(), out)?.flatten(grid)
}

/// Semantic saliency `S_sem` in `[0, 1]^N`.
pub fn semantic_prior(
    feats: &FeatureMatrix,
    text: &TextEmbedding,
    tau: f64,
    window: usize,
) -> Result<ScoreVector> {
    let p = cross_modal_softmax(feats, text, tau)?;
    let pooled = spatial_avg_pool(&p, window)?;
    minmax_normalize(&pooled)
}
