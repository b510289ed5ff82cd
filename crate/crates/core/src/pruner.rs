//! N:M pruning and the hardware CSC container.
//!
//! Blocks of M run along the input-channel axis within each output column;
//! pruning keeps the top-N entries of each block by importance score. The
//! compressed form stores, per column, the kept values in block-major
//! coordinate-ascending order plus one bit-packed block coordinate per value
//! (`log2(M)` bits, little-endian bit order, padded to a byte per column).
//! The coordinate's LSB is the in-word 2:1 bit-line select; the high bits
//! drive the distribution-unit multiplexers.

use std::fs;
use std::path::{Path, PathBuf};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pattern::PatternChoice;
use crate::scalar::Real;
use crate::store::WeightTensor;

/// A dense tensor with pruned entries zeroed and the keep decision recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedTensor<T> {
    pub dense_view: Matrix<T>,
    pub kept_mask: Matrix<bool>,
    pub pattern: PatternChoice,
}

/// CSC-encoded N:M tensor. `values[col]` lists kept values in ascending
/// block/coordinate order; `metadata[col]` is the bit-packed coordinate
/// stream for that column.
#[derive(Debug, Clone, PartialEq)]
pub struct NmCompressedTensor<T> {
    pub pattern: PatternChoice,
    pub cols: usize,
    pub blocks_per_col: usize,
    pub values: Vec<Vec<T>>,
    pub metadata: Vec<Vec<u8>>,
}

fn block_len(c_in: usize, m: usize, block: usize) -> usize {
    (c_in - block * m).min(m)
}

/// Keep the top-N entries per M-block of each column, ranked by importance
/// score; score ties keep the lower row index. A trailing partial block of
/// length p keeps min(N, p).
pub fn prune<T: Real>(
    tensor: &WeightTensor<T>,
    scores: &Matrix<T>,
    pattern: PatternChoice,
) -> Result<PrunedTensor<T>> {
    if !pattern.is_valid() {
        return Err(Error::InvalidPattern {
            n: pattern.n,
            m: pattern.m,
        });
    }
    if scores.rows() != tensor.data.rows() || scores.cols() != tensor.data.cols() {
        return Err(Error::ShapeMismatch {
            expected: tensor.data.len(),
            found: scores.len(),
        });
    }
    let (c_in, c_out) = (tensor.data.rows(), tensor.data.cols());
    let m = pattern.m as usize;
    let n = pattern.n as usize;
    let mut dense = tensor.data.clone();
    let mut kept = Matrix::filled(c_in, c_out, false);
    let blocks = c_in.div_ceil(m);
    let mut ranked: Vec<(usize, T)> = Vec::with_capacity(m);
    for col in 0..c_out {
        for block in 0..blocks {
            let start = block * m;
            let len = block_len(c_in, m, block);
            ranked.clear();
            ranked.extend((start..start + len).map(|r| (r, scores.get(r, col))));
            ranked.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });
            let keep = n.min(len);
            for &(row, _) in ranked.iter().take(keep) {
                kept.set(row, col, true);
            }
            for &(row, _) in ranked.iter().skip(keep) {
                dense.set(row, col, T::zero());
            }
        }
    }
    Ok(PrunedTensor {
        dense_view: dense,
        kept_mask: kept,
        pattern,
    })
}

/// Fraction of pruned positions among all positions.
pub fn achieved_sparsity<T>(pruned: &PrunedTensor<T>) -> f64 {
    let total = pruned.kept_mask.len();
    if total == 0 {
        return 0.0;
    }
    (total - pruned.kept_mask.count_true()) as f64 / total as f64
}

fn pack_coords(coords: &[u8], bits: u32) -> Vec<u8> {
    let total_bits = coords.len() * bits as usize;
    let mut bytes = vec![0u8; total_bits.div_ceil(8)];
    for (k, &coord) in coords.iter().enumerate() {
        for t in 0..bits as usize {
            if coord >> t & 1 == 1 {
                let pos = k * bits as usize + t;
                bytes[pos >> 3] |= 1 << (pos & 7);
            }
        }
    }
    bytes
}

fn unpack_coord(bytes: &[u8], index: usize, bits: u32) -> u8 {
    let mut coord = 0u8;
    for t in 0..bits as usize {
        let pos = index * bits as usize + t;
        if bytes[pos >> 3] >> (pos & 7) & 1 == 1 {
            coord |= 1 << t;
        }
    }
    coord
}

/// Encode a mask-designated set of kept positions into the CSC form. The
/// mask must satisfy the pattern invariant: exactly min(N, block length)
/// kept entries per block.
pub fn encode_csc_masked<T: Copy>(
    dense: &Matrix<T>,
    kept_mask: &Matrix<bool>,
    pattern: PatternChoice,
) -> Result<NmCompressedTensor<T>> {
    let (c_in, c_out) = (dense.rows(), dense.cols());
    let m = pattern.m as usize;
    let n = pattern.n as usize;
    let bits = pattern.metadata_bits();
    let blocks = c_in.div_ceil(m);
    let mut values = Vec::with_capacity(c_out);
    let mut metadata = Vec::with_capacity(c_out);
    let mut coords: Vec<u8> = Vec::new();
    for col in 0..c_out {
        let mut col_values = Vec::new();
        coords.clear();
        for block in 0..blocks {
            let start = block * m;
            let len = block_len(c_in, m, block);
            let mut kept_in_block = 0usize;
            for offset in 0..len {
                if kept_mask.get(start + offset, col) {
                    col_values.push(dense.get(start + offset, col));
                    coords.push(offset as u8);
                    kept_in_block += 1;
                }
            }
            let expected = n.min(len);
            if kept_in_block != expected {
                return Err(Error::PatternViolation {
                    col,
                    block,
                    detail: format!("kept {kept_in_block} of expected {expected}"),
                });
            }
        }
        metadata.push(pack_coords(&coords, bits));
        values.push(col_values);
    }
    Ok(NmCompressedTensor {
        pattern,
        cols: c_out,
        blocks_per_col: blocks,
        values,
        metadata,
    })
}

pub fn encode_csc<T: Copy>(pruned: &PrunedTensor<T>) -> Result<NmCompressedTensor<T>> {
    encode_csc_masked(&pruned.dense_view, &pruned.kept_mask, pruned.pattern)
}

fn decode_common<T: Copy + Zero>(
    compressed: &NmCompressedTensor<T>,
    c_in: usize,
    mut emit: impl FnMut(usize, usize, T),
) -> Result<()> {
    let m = compressed.pattern.m as usize;
    let n = compressed.pattern.n as usize;
    let bits = compressed.pattern.metadata_bits();
    let blocks = c_in.div_ceil(m);
    if blocks != compressed.blocks_per_col {
        return Err(Error::ShapeMismatch {
            expected: compressed.blocks_per_col,
            found: blocks,
        });
    }
    if compressed.values.len() != compressed.cols || compressed.metadata.len() != compressed.cols {
        return Err(Error::ShapeMismatch {
            expected: compressed.cols,
            found: compressed.values.len(),
        });
    }
    for col in 0..compressed.cols {
        let col_values = &compressed.values[col];
        let col_meta = &compressed.metadata[col];
        let expected: usize = (0..blocks).map(|b| n.min(block_len(c_in, m, b))).sum();
        if col_values.len() != expected {
            return Err(Error::CorruptMetadata {
                col,
                block: 0,
                detail: format!("{} values, expected {expected}", col_values.len()),
            });
        }
        if col_meta.len() < (expected * bits as usize).div_ceil(8) {
            return Err(Error::CorruptMetadata {
                col,
                block: 0,
                detail: "metadata stream too short".into(),
            });
        }
        let mut k = 0usize;
        for block in 0..blocks {
            let len = block_len(c_in, m, block);
            let count = n.min(len);
            let mut last: Option<u8> = None;
            for _ in 0..count {
                let coord = unpack_coord(col_meta, k, bits);
                if coord as usize >= len {
                    return Err(Error::CorruptMetadata {
                        col,
                        block,
                        detail: format!("coordinate {coord} outside block of length {len}"),
                    });
                }
                if let Some(prev) = last {
                    if coord <= prev {
                        return Err(Error::CorruptMetadata {
                            col,
                            block,
                            detail: format!("non-increasing coordinates {prev} -> {coord}"),
                        });
                    }
                }
                last = Some(coord);
                emit(block * m + coord as usize, col, col_values[k]);
                k += 1;
            }
        }
    }
    Ok(())
}

/// Reconstruct the dense matrix; unlisted coordinates decode to zero.
pub fn decode_csc<T: Copy + Zero>(
    compressed: &NmCompressedTensor<T>,
    c_in: usize,
) -> Result<Matrix<T>> {
    let mut dense = Matrix::filled(c_in, compressed.cols, T::zero());
    decode_common(compressed, c_in, |row, col, value| {
        dense.set(row, col, value);
    })?;
    Ok(dense)
}

/// Reconstruct only the kept-position mask.
pub fn decode_mask<T: Copy + Zero>(
    compressed: &NmCompressedTensor<T>,
    c_in: usize,
) -> Result<Matrix<bool>> {
    let mut mask = Matrix::filled(c_in, compressed.cols, false);
    decode_common(compressed, c_in, |row, col, _| {
        mask.set(row, col, true);
    })?;
    Ok(mask)
}

/// Symmetric per-column int8 quantization: `scale_j = max|W[:, j]| / 127`,
/// zero columns get scale 1. Returns the quantized matrix and the scales.
pub fn quantize_per_column(dense: &Matrix<f32>) -> (Matrix<i8>, Vec<f32>) {
    let mut scales = Vec::with_capacity(dense.cols());
    for col in 0..dense.cols() {
        let mut max_abs = 0.0f32;
        for row in 0..dense.rows() {
            max_abs = max_abs.max(dense.get(row, col).abs());
        }
        scales.push(if max_abs == 0.0 { 1.0 } else { max_abs / 127.0 });
    }
    let q = Matrix::from_fn(dense.rows(), dense.cols(), |i, j| {
        (dense.get(i, j) / scales[j]).round().clamp(-127.0, 127.0) as i8
    });
    (q, scales)
}

// ---------------------------------------------------------------------------
// On-disk form: JSON sidecar + two raw payloads.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CscHeader {
    #[serde(rename = "N")]
    pub n: u8,
    #[serde(rename = "M")]
    pub m: u8,
    pub c_in: usize,
    pub c_out: usize,
    pub dtype: String,
}

fn payload_paths(sidecar: &Path) -> (PathBuf, PathBuf) {
    (
        sidecar.with_extension("values"),
        sidecar.with_extension("meta"),
    )
}

/// Write `<stem>.json` (header), `<stem>.values` and `<stem>.meta`.
pub fn write_compressed_f32(
    sidecar: &Path,
    compressed: &NmCompressedTensor<f32>,
    c_in: usize,
) -> Result<()> {
    let header = CscHeader {
        n: compressed.pattern.n,
        m: compressed.pattern.m,
        c_in,
        c_out: compressed.cols,
        dtype: "f32".into(),
    };
    if let Some(parent) = sidecar.parent() {
        fs::create_dir_all(parent)?;
    }
    let (values_path, meta_path) = payload_paths(sidecar);
    let mut value_bytes = Vec::new();
    for col in &compressed.values {
        for v in col {
            value_bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut meta_bytes = Vec::new();
    for col in &compressed.metadata {
        meta_bytes.extend_from_slice(col);
    }
    fs::write(sidecar, serde_json::to_string_pretty(&header)?)?;
    fs::write(values_path, value_bytes)?;
    fs::write(meta_path, meta_bytes)?;
    Ok(())
}

/// Read a compressed tensor written by [`write_compressed_f32`]. Returns the
/// tensor and the input-channel count from the header.
pub fn read_compressed_f32(sidecar: &Path) -> Result<(NmCompressedTensor<f32>, usize)> {
    let header: CscHeader = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
    if header.dtype != "f32" {
        return Err(Error::Manifest(format!(
            "unsupported compressed dtype `{}`",
            header.dtype
        )));
    }
    let pattern = PatternChoice::new(header.n, header.m)?;
    let m = pattern.m as usize;
    let n = pattern.n as usize;
    let blocks = header.c_in.div_ceil(m);
    let bits = pattern.metadata_bits();
    let count_per_col: usize = (0..blocks)
        .map(|b| n.min(block_len(header.c_in, m, b)))
        .sum();
    let meta_bytes_per_col = (count_per_col * bits as usize).div_ceil(8);

    let (values_path, meta_path) = payload_paths(sidecar);
    let value_bytes = fs::read(values_path)?;
    if value_bytes.len() != count_per_col * header.c_out * 4 {
        return Err(Error::PayloadSize {
            expected: count_per_col * header.c_out * 4,
            found: value_bytes.len(),
        });
    }
    let meta_bytes = fs::read(meta_path)?;
    if meta_bytes.len() != meta_bytes_per_col * header.c_out {
        return Err(Error::PayloadSize {
            expected: meta_bytes_per_col * header.c_out,
            found: meta_bytes.len(),
        });
    }
    let mut values = Vec::with_capacity(header.c_out);
    let mut metadata = Vec::with_capacity(header.c_out);
    for col in 0..header.c_out {
        let vstart = col * count_per_col * 4;
        values.push(
            value_bytes[vstart..vstart + count_per_col * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        );
        let mstart = col * meta_bytes_per_col;
        metadata.push(meta_bytes[mstart..mstart + meta_bytes_per_col].to_vec());
    }
    Ok((
        NmCompressedTensor {
            pattern,
            cols: header.c_out,
            blocks_per_col: blocks,
            values,
            metadata,
        },
        header.c_in,
    ))
}
