//! Per-layer outlier statistics: importance scores, outlier masks, outlier
//! fraction O and spatial distribution D / ND.
//!
//! D treats outliers positionally: it is the pairwise L1 distance between
//! outlier coordinates averaged over the number of pairs, summed over
//! non-overlapping 128x128 tiles. Low ND means clustered outliers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::store::{Layer, WeightTensor};

pub const DEFAULT_TAU: f64 = 3.0;
pub const DEFAULT_BLOCK_SIZE: usize = 128;

/// Element-wise importance: `scores[i][j] = |W[i][j]| * act_norms[i]`.
pub fn importance<T: Real>(tensor: &WeightTensor<T>) -> Matrix<T> {
    let norms = &tensor.act_norms;
    Matrix::from_fn(tensor.data.rows(), tensor.data.cols(), |i, j| {
        tensor.data.get(i, j).abs() * norms[i]
    })
}

/// Mean and population standard deviation of a score matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreStats<T> {
    pub mean: T,
    pub stddev: T,
}

/// Flag every score strictly above `mean + tau * stddev` as an outlier.
pub fn outlier_mask<T: Real>(scores: &Matrix<T>, tau: T) -> (Matrix<bool>, ScoreStats<T>) {
    assert!(tau > T::zero(), "tau must be positive");
    assert!(!scores.is_empty(), "scores must be non-empty");
    let count = T::from_usize(scores.len()).unwrap();
    let mut sum = T::zero();
    for &s in scores.as_slice() {
        sum += s;
    }
    let mean = sum / count;
    let mut var = T::zero();
    for &s in scores.as_slice() {
        let d = s - mean;
        var += d * d;
    }
    let stddev = (var / count).sqrt();
    let threshold = mean + tau * stddev;
    let mask = scores.map(|s| s > threshold);
    (mask, ScoreStats { mean, stddev })
}

/// Sum of pairwise L1 distances over a coordinate set, in exact integer
/// arithmetic. The L1 metric separates per axis, so each axis reduces to
/// `sum_{i<j} (x_j - x_i)` over sorted values, computed as
/// `sum_i (2i - n + 1) * x_i`.
pub fn pairwise_l1_sum(coords: &[(usize, usize)]) -> u64 {
    fn axis_sum(mut values: Vec<i64>) -> i64 {
        values.sort_unstable();
        let n = values.len() as i64;
        values
            .iter()
            .enumerate()
            .map(|(i, &x)| (2 * i as i64 - n + 1) * x)
            .sum()
    }
    if coords.len() < 2 {
        return 0;
    }
    let rows: Vec<i64> = coords.iter().map(|&(r, _)| r as i64).collect();
    let cols: Vec<i64> = coords.iter().map(|&(_, c)| c as i64).collect();
    (axis_sum(rows) + axis_sum(cols)) as u64
}

/// Average pairwise L1 distance between outlier coordinates within one block:
/// the pair-distance sum divided by C(n, 2). Zero when fewer than two
/// outliers are present.
pub fn block_distance(coords: &[(usize, usize)]) -> f64 {
    let n = coords.len() as u64;
    if n < 2 {
        return 0.0;
    }
    let pairs = n * (n - 1) / 2;
    pairwise_l1_sum(coords) as f64 / pairs as f64
}

/// Raw distribution D of a layer: the sum of `block_distance` over
/// non-overlapping `block_size` x `block_size` tiles. Edge tiles smaller than
/// `block_size` are processed as-is, never padded. Tiles accumulate in
/// row-major tile order so the sum is deterministic.
pub fn layer_distribution(mask: &Matrix<bool>, block_size: usize) -> f64 {
    assert!(block_size >= 2, "block_size must be at least 2");
    let mut total = 0.0;
    let tile_rows = mask.rows().div_ceil(block_size);
    let tile_cols = mask.cols().div_ceil(block_size);
    let mut coords = Vec::new();
    for tr in 0..tile_rows {
        for tc in 0..tile_cols {
            coords.clear();
            let r0 = tr * block_size;
            let c0 = tc * block_size;
            let r1 = (r0 + block_size).min(mask.rows());
            let c1 = (c0 + block_size).min(mask.cols());
            for r in r0..r1 {
                for c in c0..c1 {
                    if mask.get(r, c) {
                        coords.push((r - r0, c - c0));
                    }
                }
            }
            total += block_distance(&coords);
        }
    }
    total
}

/// Cross-layer normalization variants for D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `(x - min) / max`, guarded to all-zeros when `max == 0`.
    #[default]
    ShiftedByMax,
    /// Strict min-max `(x - min) / (max - min)`, guarded when degenerate.
    StrictMinMax,
}

/// Normalize a list of per-layer values across layers.
pub fn normalize_across_layers(raw: &[f64]) -> Vec<f64> {
    normalize_across_layers_with(raw, Normalization::ShiftedByMax)
}

pub fn normalize_across_layers_with(raw: &[f64], mode: Normalization) -> Vec<f64> {
    assert!(!raw.is_empty(), "normalization needs at least one value");
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    match mode {
        Normalization::ShiftedByMax => {
            if max == 0.0 {
                vec![0.0; raw.len()]
            } else {
                raw.iter().map(|&x| (x - min) / max).collect()
            }
        }
        Normalization::StrictMinMax => {
            let span = max - min;
            if span == 0.0 {
                vec![0.0; raw.len()]
            } else {
                raw.iter().map(|&x| (x - min) / span).collect()
            }
        }
    }
}

/// Per-layer outlier statistics after cross-layer normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerAnalysis {
    pub name: String,
    pub outlier_mask: Matrix<bool>,
    pub outlier_count: usize,
    pub outlier_fraction_raw: f64,
    /// Raw fraction divided by the maximum raw fraction across layers.
    pub o: f64,
    pub d: f64,
    pub nd: f64,
    pub tau: f64,
}

/// JSON-facing record without the mask payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAnalysisRecord {
    pub name: String,
    pub outlier_count: usize,
    pub outlier_fraction_raw: f64,
    #[serde(rename = "O")]
    pub o: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "ND")]
    pub nd: f64,
    pub tau: f64,
}

impl LayerAnalysis {
    pub fn to_record(&self) -> LayerAnalysisRecord {
        LayerAnalysisRecord {
            name: self.name.clone(),
            outlier_count: self.outlier_count,
            outlier_fraction_raw: self.outlier_fraction_raw,
            o: self.o,
            d: self.d,
            nd: self.nd,
            tau: self.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tau: f64,
    pub block_size: usize,
    pub layers: Vec<LayerAnalysisRecord>,
}

/// Analyze every layer of a model: importance, outlier mask, fraction,
/// distribution, then cross-layer O and ND normalization. Deterministic and
/// order-equivariant: permuting the input layers permutes the output.
pub fn analyze_model(layers: &[Layer], tau: f64, block_size: usize) -> Result<Vec<LayerAnalysis>> {
    if layers.is_empty() {
        return Err(Error::Manifest("no layers to analyze".into()));
    }
    let mut partial = Vec::with_capacity(layers.len());
    for layer in layers {
        let scores = importance(&layer.tensor);
        if scores.is_empty() {
            return Err(
                Error::Manifest("empty weight matrix".into()).for_layer(&layer.entry.name),
            );
        }
        let (mask, _) = outlier_mask(&scores, tau as f32);
        let count = mask.count_true();
        let fraction = count as f64 / mask.len() as f64;
        let d = layer_distribution(&mask, block_size);
        partial.push((layer.entry.name.clone(), mask, count, fraction, d));
    }
    let max_fraction = partial
        .iter()
        .map(|p| p.3)
        .fold(0.0f64, f64::max);
    let ds: Vec<f64> = partial.iter().map(|p| p.4).collect();
    let nds = normalize_across_layers(&ds);
    Ok(partial
        .into_iter()
        .zip(nds)
        .map(|((name, mask, count, fraction, d), nd)| LayerAnalysis {
            name,
            outlier_mask: mask,
            outlier_count: count,
            outlier_fraction_raw: fraction,
            o: if max_fraction == 0.0 {
                0.0
            } else {
                fraction / max_fraction
            },
            d,
            nd,
            tau,
        })
        .collect())
}
