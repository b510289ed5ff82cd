//! Functional and analytic models of a partitioned digital compute-in-memory
//! macro running N:M sparse GEMMs, plus analytic baseline architectures.
//!
//! The macro is an X x Y array of 8-bit words split row-wise into P
//! sub-macros. A distribution unit of P P:1 multiplexers routes activation
//! pairs to sub-macro rows using the high metadata bits; the coordinate LSB
//! drives the in-word 2:1 bit-line select. N sub-macros aggregate to process
//! one M-block; a merging unit sums the P per-sub-macro partial sums.

pub mod baseline;
pub mod energy;
pub mod functional;
pub mod latency;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::PatternChoice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MacroConfig {
    /// Crossbar rows (memory words per column across all sub-macros).
    pub x: usize,
    /// Crossbar columns.
    pub y: usize,
    /// Word size in bits; also the bit-serial MAC length.
    pub word_bits: u32,
    /// Sub-macro count; the macro splits into P row-wise partitions.
    pub p: usize,
    /// Activation buffer bandwidth in 8-bit activations per cycle.
    pub act_buffer_bandwidth: usize,
    /// Cycles for one bit-serial MAC.
    pub bitserial_cycles: u32,
}

impl Default for MacroConfig {
    fn default() -> Self {
        Self {
            x: 128,
            y: 32,
            word_bits: 8,
            p: 4,
            act_buffer_bandwidth: 128,
            bitserial_cycles: 8,
        }
    }
}

impl MacroConfig {
    pub fn validate(&self) -> Result<()> {
        if self.x == 0 || self.y == 0 || self.p == 0 {
            return Err(Error::Config("macro dimensions must be positive".into()));
        }
        if self.x % self.p != 0 {
            return Err(Error::Config(format!(
                "rows {} not divisible by sub-macro count {}",
                self.x, self.p
            )));
        }
        if self.act_buffer_bandwidth == 0 {
            return Err(Error::Config("activation bandwidth must be positive".into()));
        }
        Ok(())
    }

    pub fn sub_macro_rows(&self) -> usize {
        self.x / self.p
    }

    /// Sustained word-MAC throughput: X*Y words each finish one MAC every
    /// `word_bits` cycles.
    pub fn peak_macs_per_cycle(&self) -> f64 {
        (self.x * self.y) as f64 / f64::from(self.word_bits)
    }
}

/// Row/column pipelining parameters for one pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleParams {
    /// Rows of a sub-macro column fed per cycle.
    pub rows_per_cycle: usize,
    /// Feed stages for a fully occupied sub-macro column: `sub_rows / R`.
    pub pipeline_stages: u32,
    /// One full column sweep for one token plus the trailing MAC drain.
    pub cycles_per_column_tile_pass: u64,
}

/// Distinct activations one distribution-unit row group consumes per cycle.
/// Sparse patterns select from M candidates per multiplexer across P/N
/// independent groups; dense mode streams one activation per row.
fn acts_per_row_group(pattern: PatternChoice, cfg: &MacroConfig) -> usize {
    if pattern.is_dense() {
        cfg.p
    } else {
        let n_agg = (pattern.n as usize).min(cfg.p);
        cfg.p.div_ceil(n_agg) * pattern.m as usize
    }
}

/// How many rows can be fed in parallel under the activation-bandwidth cap,
/// and the resulting pipeline stage count.
pub fn rows_per_cycle(pattern: PatternChoice, cfg: &MacroConfig) -> Result<ScheduleParams> {
    cfg.validate()?;
    if !pattern.is_valid() {
        return Err(Error::InvalidPattern {
            n: pattern.n,
            m: pattern.m,
        });
    }
    let sub_rows = cfg.sub_macro_rows();
    let group = acts_per_row_group(pattern, cfg);
    let r = (cfg.act_buffer_bandwidth / group).clamp(1, sub_rows);
    let stages = sub_rows.div_ceil(r) as u32;
    Ok(ScheduleParams {
        rows_per_cycle: r,
        pipeline_stages: stages,
        cycles_per_column_tile_pass: cfg.y as u64 * u64::from(stages)
            + u64::from(cfg.bitserial_cycles),
    })
}

/// GEMM dimensions of one layer invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDims {
    pub c_in: usize,
    pub c_out: usize,
    pub tokens: usize,
}

impl LayerDims {
    pub fn new(c_in: usize, c_out: usize, tokens: usize) -> Self {
        Self {
            c_in,
            c_out,
            tokens,
        }
    }
}

/// Value slots one column occupies in macro rows. The macro stores CSC
/// values, so sparse patterns occupy `ceil(C_in / M) * N` slots; dense mode
/// stores the column verbatim.
pub fn column_slots(c_in: usize, pattern: PatternChoice) -> usize {
    if pattern.is_dense() {
        c_in
    } else {
        c_in.div_ceil(pattern.m as usize) * pattern.n as usize
    }
}

/// Stored nonzero count per column: partial trailing blocks keep
/// `min(N, remainder)` values.
pub fn stored_per_column(c_in: usize, pattern: PatternChoice) -> usize {
    if pattern.is_dense() {
        return c_in;
    }
    let m = pattern.m as usize;
    let n = pattern.n as usize;
    let full = c_in / m;
    let rem = c_in % m;
    full * n + n.min(rem)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileCounts {
    pub col_tiles: u64,
    pub row_tiles: u64,
}

impl TileCounts {
    pub fn total(&self) -> u64 {
        self.col_tiles * self.row_tiles
    }
}

/// Column tiles cover C_out in strips of Y; row tiles cover the stored value
/// slots in strips of X.
pub fn tile_counts(dims: LayerDims, pattern: PatternChoice, cfg: &MacroConfig) -> TileCounts {
    TileCounts {
        col_tiles: dims.c_out.div_ceil(cfg.y) as u64,
        row_tiles: column_slots(dims.c_in, pattern).div_ceil(cfg.x) as u64,
    }
}
