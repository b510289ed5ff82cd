//! Analytic baseline architectures for iso-throughput comparisons.
//!
//! Two families share the comparison:
//!   - DCiM family: the flexible macro itself, a dense DCiM (same macro,
//!     dense schedule) and an SDP-style DCiM that accelerates only 1:2 and
//!     treats every other pattern as dense.
//!   - digital family: a weight-stationary systolic array, dense or with
//!     flexible N:M support. To hold the peak MAC rate equal to the
//!     bit-serial macro, its PEs are modeled at one 8-bit MAC per
//!     `word_bits` cycles: 64x64 PEs / 8 cycles matches 128x32x8 exactly.
//!
//! Digital designs stream weights through their local buffers every layer;
//! DCiM designs hold weights in the macro and stream only activations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::PatternChoice;

use super::energy::{
    energy_model, metadata_bytes, stored_values, EnergyBreakdown, EnergyTable, EventCounts,
};
use super::latency::latency_model;
use super::{LayerDims, MacroConfig};

pub const DENSE_PATTERN: PatternChoice = PatternChoice::new_unchecked(8, 8);
pub const SDP_PATTERN: PatternChoice = PatternChoice::new_unchecked(1, 2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchId {
    Flexcim,
    DenseDcim,
    Sdp1to2,
    DenseSystolic,
    FlexibleDigital,
}

impl ArchId {
    pub const ALL: [ArchId; 5] = [
        ArchId::Flexcim,
        ArchId::DenseDcim,
        ArchId::Sdp1to2,
        ArchId::DenseSystolic,
        ArchId::FlexibleDigital,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ArchId::Flexcim => "flexcim",
            ArchId::DenseDcim => "dense_dcim",
            ArchId::Sdp1to2 => "sdp_1to2",
            ArchId::DenseSystolic => "dense_systolic",
            ArchId::FlexibleDigital => "flexible_digital",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::UnsupportedArch(s.to_string()))
    }

    /// The dense design each architecture normalizes against.
    pub fn dense_reference(&self) -> ArchId {
        match self {
            ArchId::DenseSystolic | ArchId::FlexibleDigital => ArchId::DenseSystolic,
            _ => ArchId::DenseDcim,
        }
    }
}

impl std::fmt::Display for ArchId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystolicConfig {
    /// Square array dimension.
    pub dim: usize,
    /// MAC cadence in cycles; pinned to the macro's bit-serial length so the
    /// array is iso-peak-throughput with the DCiM configuration.
    pub word_bits: u32,
}

impl Default for SystolicConfig {
    fn default() -> Self {
        Self { dim: 64, word_bits: 8 }
    }
}

impl SystolicConfig {
    pub fn peak_macs_per_cycle(&self) -> f64 {
        (self.dim * self.dim) as f64 / f64::from(self.word_bits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.word_bits == 0 {
            return Err(Error::Config("systolic dimensions must be positive".into()));
        }
        Ok(())
    }
}

fn systolic_tiles(dims: LayerDims, cfg: &SystolicConfig) -> u64 {
    (dims.c_in.div_ceil(cfg.dim) * dims.c_out.div_ceil(cfg.dim)) as u64
}

/// Weight-stationary fill + stream + drain count. `compute_scale` shrinks
/// the streaming term for sparsity-skipping digital designs.
fn systolic_cycles(dims: LayerDims, cfg: &SystolicConfig, compute_scale: (u64, u64)) -> u64 {
    let tiles = systolic_tiles(dims, cfg);
    if tiles == 0 || dims.tokens == 0 {
        return 0;
    }
    let (num, den) = compute_scale;
    let stream = (dims.tokens as u64 * u64::from(cfg.word_bits) * num).div_ceil(den);
    let fill = cfg.dim as u64;
    let drain = cfg.dim as u64 - 1;
    tiles * (fill + stream + drain)
}

fn systolic_energy(
    dims: LayerDims,
    weight_bytes: u64,
    meta_bytes: u64,
    macs: u64,
    selects: u64,
    cfg: &SystolicConfig,
    table: &EnergyTable,
) -> EnergyBreakdown {
    let col_tiles = dims.c_out.div_ceil(cfg.dim) as u64;
    if systolic_tiles(dims, cfg) == 0 || dims.tokens == 0 {
        return EnergyBreakdown::from_events(EventCounts::default(), table);
    }
    let bit_macs = macs * u64::from(cfg.word_bits);
    let events = EventCounts {
        bit_macs,
        adder_tree_adds: bit_macs,
        mux_selects: selects,
        merging_adds: 0,
        psum_accumulates: 0,
        // Digital arrays stream both activations and weights from L1.
        local_bytes: dims.tokens as u64 * dims.c_in as u64 * col_tiles + weight_bytes + meta_bytes,
        global_bytes: weight_bytes + meta_bytes + dims.tokens as u64 * dims.c_in as u64,
    };
    EnergyBreakdown::from_events(events, table)
}

/// Cycle and energy estimate of one layer on one architecture.
pub fn baseline_model(
    arch: ArchId,
    dims: LayerDims,
    pattern: PatternChoice,
    macro_cfg: &MacroConfig,
    systolic_cfg: &SystolicConfig,
    table: &EnergyTable,
) -> Result<(u64, EnergyBreakdown)> {
    if !pattern.is_valid() {
        return Err(Error::InvalidPattern {
            n: pattern.n,
            m: pattern.m,
        });
    }
    systolic_cfg.validate()?;
    match arch {
        ArchId::Flexcim => Ok((
            latency_model(dims, pattern, macro_cfg)?,
            energy_model(dims, pattern, macro_cfg, table)?,
        )),
        ArchId::DenseDcim => Ok((
            latency_model(dims, DENSE_PATTERN, macro_cfg)?,
            energy_model(dims, DENSE_PATTERN, macro_cfg, table)?,
        )),
        ArchId::Sdp1to2 => {
            let effective = if pattern == SDP_PATTERN {
                SDP_PATTERN
            } else {
                DENSE_PATTERN
            };
            Ok((
                latency_model(dims, effective, macro_cfg)?,
                energy_model(dims, effective, macro_cfg, table)?,
            ))
        }
        ArchId::DenseSystolic => {
            let macs = (dims.c_in * dims.c_out * dims.tokens) as u64;
            let weight_bytes = (dims.c_in * dims.c_out) as u64;
            Ok((
                systolic_cycles(dims, systolic_cfg, (1, 1)),
                systolic_energy(dims, weight_bytes, 0, macs, 0, systolic_cfg, table),
            ))
        }
        ArchId::FlexibleDigital => {
            let nnz = stored_values(dims, pattern);
            let macs = nnz * dims.tokens as u64;
            let selects = if pattern.is_dense() { 0 } else { macs };
            let meta = metadata_bytes(dims, pattern);
            Ok((
                systolic_cycles(
                    dims,
                    systolic_cfg,
                    (u64::from(pattern.n), u64::from(pattern.m)),
                ),
                systolic_energy(dims, nnz, meta, macs, selects, systolic_cfg, table),
            ))
        }
    }
}
