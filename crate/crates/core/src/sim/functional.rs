//! Bit-true functional execution of an N:M sparse GEMM on the partitioned
//! macro.
//!
//! Per column and token the model walks the hardware path: the metadata high
//! bits pick the distribution-unit input line (a pair of activations), the
//! LSB picks one of the two bit-lines, each sub-macro accumulates a
//! bit-serial partial sum (activation bits MSB-first, bit 7 weighted -2^7 for
//! two's complement), and the merging unit sums the P partials. The result
//! must equal a plain int32 GEMM on the decoded weights; any disagreement
//! between the routed activation and the metadata coordinate is reported as
//! an internal error rather than silently absorbed.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pruner::NmCompressedTensor;

use super::MacroConfig;

struct RoutedEntry {
    act_index: usize,
    weight: i8,
    sub_macro: usize,
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

/// Walk one column's CSC stream, validate it, and assign each value a
/// sub-macro and activation index. Blocks rotate over the P/N multiplexer
/// groups; the N values of a block land at spatially identical rows of N
/// aggregated sub-macros.
fn route_column(
    compressed: &NmCompressedTensor<i8>,
    col: usize,
    c_in: usize,
    cfg: &MacroConfig,
) -> Result<Vec<RoutedEntry>> {
    let pattern = compressed.pattern;
    let m = pattern.m as usize;
    let n = pattern.n as usize;
    let bits = pattern.metadata_bits();
    let values = &compressed.values[col];
    let meta = &compressed.metadata[col];
    let n_agg = n.min(cfg.p);
    let groups = cfg.p.div_ceil(n_agg);
    let sub_rows = cfg.sub_macro_rows();

    let mut routed = Vec::with_capacity(values.len());
    let mut k = 0usize;
    for block in 0..compressed.blocks_per_col {
        let len = (c_in - block * m).min(m);
        let count = n.min(len);
        let mut last: Option<u8> = None;
        for v in 0..count {
            if k >= values.len() {
                return Err(Error::CorruptMetadata {
                    col,
                    block,
                    detail: "value stream shorter than the pattern requires".into(),
                });
            }
            let coord = unpack_coord(meta, k, bits);
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
            let sub_macro = if pattern.is_dense() {
                (k / sub_rows) % cfg.p
            } else {
                (block % groups) * n_agg + v % n_agg
            };
            routed.push(RoutedEntry {
                act_index: block * m + coord as usize,
                weight: values[k],
                sub_macro,
            });
            k += 1;
        }
    }
    if k != values.len() {
        return Err(Error::CorruptMetadata {
            col,
            block: compressed.blocks_per_col,
            detail: format!("{} trailing values beyond the pattern", values.len() - k),
        });
    }
    Ok(routed)
}

/// Model the two-level activation selection for one entry: the high metadata
/// bits choose the 16-bit input line (an activation pair), the LSB chooses
/// the bit-line. Returns the selected activation after checking that the
/// routed value matches direct indexing.
fn select_activation(
    iacts_row: &[i8],
    block_base: usize,
    coord: usize,
    dense: bool,
    col: usize,
) -> Result<i8> {
    let direct = iacts_row[block_base + coord];
    if dense {
        // Dense inference streams the same activation on both bit-lines and
        // the select is a don't-care.
        return Ok(direct);
    }
    let line = coord >> 1;
    let pair_base = block_base + 2 * line;
    let low = iacts_row.get(pair_base).copied().unwrap_or(0);
    let high = iacts_row.get(pair_base + 1).copied().unwrap_or(0);
    let selected = if coord & 1 == 1 { high } else { low };
    if selected != direct {
        return Err(Error::Internal(format!(
            "distribution select mismatch in column {col}: routed {selected}, stored coordinate addresses {direct}"
        )));
    }
    Ok(selected)
}

/// Execute the sparse GEMM: `iacts` is `(tokens, C_in)` int8, the result is
/// `(tokens, C_out)` int32.
pub fn functional_gemm(
    compressed: &NmCompressedTensor<i8>,
    iacts: &Matrix<i8>,
    cfg: &MacroConfig,
) -> Result<Matrix<i32>> {
    cfg.validate()?;
    let c_in = iacts.cols();
    let m = compressed.pattern.m as usize;
    if c_in.div_ceil(m) != compressed.blocks_per_col {
        return Err(Error::ShapeMismatch {
            expected: compressed.blocks_per_col,
            found: c_in.div_ceil(m),
        });
    }
    let tokens = iacts.rows();
    let word_bits = cfg.word_bits;
    let dense = compressed.pattern.is_dense();
    let mut out = Matrix::filled(tokens, compressed.cols, 0i32);
    let mut psums = vec![0i64; cfg.p];
    let mut tree = vec![0i64; cfg.p];
    let mut selected = Vec::new();
    for col in 0..compressed.cols {
        let routed = route_column(compressed, col, c_in, cfg)?;
        for token in 0..tokens {
            let row = iacts.row(token);
            // Distribution + bit-line selection happens once per feed; the
            // selected activation is then serialized over word_bits cycles.
            selected.clear();
            for entry in &routed {
                let block_base = entry.act_index - entry.act_index % m;
                let coord = entry.act_index % m;
                selected.push(select_activation(row, block_base, coord, dense, col)?);
            }
            psums.iter_mut().for_each(|p| *p = 0);
            // Bit-serial: one adder-tree reduction per activation bit per
            // sub-macro, then a shift-accumulate into the PSum register.
            for bit in (0..word_bits).rev() {
                tree.iter_mut().for_each(|t| *t = 0);
                for (entry, &act) in routed.iter().zip(&selected) {
                    if (act as u8) >> bit & 1 == 1 {
                        tree[entry.sub_macro] += i64::from(entry.weight);
                    }
                }
                let factor: i64 = if bit == word_bits - 1 {
                    -(1 << bit)
                } else {
                    1 << bit
                };
                for (psum, t) in psums.iter_mut().zip(&tree) {
                    *psum += factor * t;
                }
            }
            // Merging unit: P-input adder tree over the sub-macro partials.
            let merged: i64 = psums.iter().sum();
            out.set(token, col, i32::try_from(merged).map_err(|_| {
                Error::Simulator(format!("accumulator overflow in column {col}"))
            })?);
        }
    }
    Ok(out)
}

/// Plain int32 GEMM on a dense int8 weight matrix, `out = iacts * weights`.
pub fn reference_gemm(weights: &Matrix<i8>, iacts: &Matrix<i8>) -> Result<Matrix<i32>> {
    if weights.rows() != iacts.cols() {
        return Err(Error::ShapeMismatch {
            expected: weights.rows(),
            found: iacts.cols(),
        });
    }
    let mut out = Matrix::filled(iacts.rows(), weights.cols(), 0i32);
    for t in 0..iacts.rows() {
        for j in 0..weights.cols() {
            let mut acc = 0i32;
            for i in 0..weights.rows() {
                acc += i32::from(iacts.get(t, i)) * i32::from(weights.get(i, j));
            }
            out.set(t, j, acc);
        }
    }
    Ok(out)
}

/// Quantize a pruned f32 matrix and re-encode it for the simulator, keeping
/// the CSC structure of `mask`.
pub fn quantized_compressed(
    dense: &Matrix<f32>,
    mask: &Matrix<bool>,
    pattern: crate::pattern::PatternChoice,
) -> Result<(NmCompressedTensor<i8>, Matrix<i8>, Vec<f32>)> {
    let (quantized, scales) = crate::pruner::quantize_per_column(dense);
    // Quantization cannot revive pruned entries: zeros map to zero.
    debug_assert!(quantized
        .iter_indexed()
        .all(|(r, c, v)| mask.get(r, c) || v.is_zero()));
    let compressed = crate::pruner::encode_csc_masked(&quantized, mask, pattern)?;
    Ok((compressed, quantized, scales))
}
