//! Event-count energy model.
//!
//! Costs are abstract units in a table; reported quantities are only ever
//! compared as ratios or orderings. Event accounting, per layer:
//!   - a stored value performs one `word_bits`-cycle bit-serial MAC per
//!     token: `bit_macs = nnz * tokens * word_bits`, one adder-tree input per
//!     bit product;
//!   - sparse patterns pay one distribution-unit select per stored value per
//!     token; dense mode streams the same activations on both bit-lines and
//!     selects nothing;
//!   - merging sums P sub-macro partials per column result (P - 1 adds), the
//!     PSum accumulator shift-adds once per bit per active sub-macro column;
//!   - local traffic is the activation stream: all C_in bytes once per
//!     column tile per token; weights live inside the macro and stream
//!     nothing;
//!   - global traffic is the one-time layer load (values plus metadata for
//!     sparse patterns) and one activation fetch.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pattern::PatternChoice;

use super::{stored_per_column, tile_counts, LayerDims, MacroConfig};

/// Abstract per-event energy costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyTable {
    pub bitcell_mac_bitop: f64,
    pub adder_tree_add: f64,
    pub distribution_mux_select: f64,
    pub merging_add: f64,
    pub psum_accumulate: f64,
    pub l1_access_per_byte: f64,
    pub global_sram_access_per_byte: f64,
}

impl Default for EnergyTable {
    fn default() -> Self {
        // Relative magnitudes: mux select << adds << SRAM accesses.
        Self {
            bitcell_mac_bitop: 1.0,
            adder_tree_add: 2.0,
            distribution_mux_select: 0.25,
            merging_add: 2.0,
            psum_accumulate: 2.0,
            l1_access_per_byte: 16.0,
            global_sram_access_per_byte: 64.0,
        }
    }
}

impl EnergyTable {
    pub fn validate(&self) -> Result<()> {
        let costs = [
            self.bitcell_mac_bitop,
            self.adder_tree_add,
            self.distribution_mux_select,
            self.merging_add,
            self.psum_accumulate,
            self.l1_access_per_byte,
            self.global_sram_access_per_byte,
        ];
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(crate::error::Error::Config(
                "energy costs must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventCounts {
    pub bit_macs: u64,
    pub adder_tree_adds: u64,
    pub mux_selects: u64,
    pub merging_adds: u64,
    pub psum_accumulates: u64,
    pub local_bytes: u64,
    pub global_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub compute: f64,
    pub local_memory: f64,
    pub global_memory: f64,
    pub events: EventCounts,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.compute + self.local_memory + self.global_memory
    }

    pub fn from_events(events: EventCounts, table: &EnergyTable) -> Self {
        Self {
            compute: events.bit_macs as f64 * table.bitcell_mac_bitop
                + events.adder_tree_adds as f64 * table.adder_tree_add
                + events.mux_selects as f64 * table.distribution_mux_select
                + events.merging_adds as f64 * table.merging_add
                + events.psum_accumulates as f64 * table.psum_accumulate,
            local_memory: events.local_bytes as f64 * table.l1_access_per_byte,
            global_memory: events.global_bytes as f64 * table.global_sram_access_per_byte,
            events,
        }
    }
}

/// Stored nonzero count for a whole layer.
pub fn stored_values(dims: LayerDims, pattern: PatternChoice) -> u64 {
    stored_per_column(dims.c_in, pattern) as u64 * dims.c_out as u64
}

/// Bit-packed metadata bytes for a whole layer; dense mode loads none.
pub fn metadata_bytes(dims: LayerDims, pattern: PatternChoice) -> u64 {
    if pattern.is_dense() {
        return 0;
    }
    let per_col = stored_per_column(dims.c_in, pattern) * pattern.metadata_bits() as usize;
    per_col.div_ceil(8) as u64 * dims.c_out as u64
}

pub fn energy_model(
    dims: LayerDims,
    pattern: PatternChoice,
    cfg: &MacroConfig,
    table: &EnergyTable,
) -> Result<EnergyBreakdown> {
    cfg.validate()?;
    table.validate()?;
    let tiles = tile_counts(dims, pattern, cfg);
    if tiles.total() == 0 || dims.tokens == 0 {
        return Ok(EnergyBreakdown::from_events(EventCounts::default(), table));
    }
    let nnz = stored_values(dims, pattern);
    let tokens = dims.tokens as u64;
    let word_bits = u64::from(cfg.word_bits);
    let bit_macs = nnz * tokens * word_bits;
    let column_results = dims.c_out as u64 * tokens * tiles.row_tiles;
    let events = EventCounts {
        bit_macs,
        adder_tree_adds: bit_macs,
        mux_selects: if pattern.is_dense() { 0 } else { nnz * tokens },
        merging_adds: column_results * (cfg.p as u64 - 1),
        psum_accumulates: column_results * cfg.p as u64 * word_bits,
        local_bytes: tokens * dims.c_in as u64 * tiles.col_tiles,
        global_bytes: nnz + metadata_bytes(dims, pattern) + tokens * dims.c_in as u64,
    };
    Ok(EnergyBreakdown::from_events(events, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(n: u8, m: u8) -> PatternChoice {
        PatternChoice::new(n, m).unwrap()
    }

    fn energy(dims: LayerDims, p: PatternChoice) -> EnergyBreakdown {
        energy_model(dims, p, &MacroConfig::default(), &EnergyTable::default()).unwrap()
    }

    #[test]
    fn zero_size_layer_costs_nothing() {
        for dims in [
            LayerDims::new(0, 32, 4),
            LayerDims::new(128, 0, 4),
            LayerDims::new(128, 32, 0),
        ] {
            let e = energy(dims, pattern(1, 2));
            assert_eq!(e.total(), 0.0);
        }
    }

    #[test]
    fn one_of_eight_does_an_eighth_of_dense_bit_macs() {
        let dims = LayerDims::new(128, 128, 4);
        let sparse = energy(dims, pattern(1, 8));
        let dense = energy(dims, pattern(8, 8));
        assert_eq!(sparse.events.bit_macs * 8, dense.events.bit_macs);
        let table = EnergyTable::default();
        let sparse_mac_energy = sparse.events.bit_macs as f64 * table.bitcell_mac_bitop;
        let dense_mac_energy = dense.events.bit_macs as f64 * table.bitcell_mac_bitop;
        assert_eq!(sparse_mac_energy, dense_mac_energy / 8.0);
        assert!(sparse.compute < dense.compute);
    }

    #[test]
    fn energy_non_increasing_in_sparsity() {
        let dims = LayerDims::new(256, 64, 8);
        let mut by_sparsity: Vec<(f64, f64, PatternChoice)> = PatternChoice::candidate_set()
            .into_iter()
            .map(|p| (p.sparsity(), energy(dims, p).total(), p))
            .collect();
        by_sparsity.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in by_sparsity.windows(2) {
            let (s1, e1, p1) = w[0];
            let (s2, e2, p2) = w[1];
            if s1 < s2 {
                assert!(e1 >= e2, "{p1} ({e1}) should cost at least {p2} ({e2})");
            }
        }
    }

    #[test]
    fn aggregated_and_flat_patterns_with_equal_nonzeros_match_mac_counts() {
        // 4:8 with 4-way aggregation and 1:2 store the same nonzero count,
        // so their total MAC event counts coincide.
        let dims = LayerDims::new(512, 32, 4);
        let agg = energy(dims, pattern(4, 8));
        let flat = energy(dims, pattern(1, 2));
        assert_eq!(agg.events.bit_macs, flat.events.bit_macs);
        assert_eq!(agg.events.mux_selects, flat.events.mux_selects);
    }

    #[test]
    fn dense_variants_are_indistinguishable() {
        let dims = LayerDims::new(250, 48, 3);
        let reference = energy(dims, pattern(8, 8));
        for m in [2u8, 4] {
            assert_eq!(energy(dims, pattern(m, m)), reference);
        }
    }

    #[test]
    fn sparse_patterns_load_metadata() {
        let dims = LayerDims::new(128, 1, 1);
        // 16 stored values * 3 bits = 48 bits = 6 bytes.
        assert_eq!(metadata_bytes(dims, pattern(1, 8)), 6);
        assert_eq!(metadata_bytes(dims, pattern(8, 8)), 0);
        // 64 values * 1 bit = 8 bytes.
        assert_eq!(metadata_bytes(dims, pattern(1, 2)), 8);
    }

    #[test]
    fn negative_costs_rejected() {
        let table = EnergyTable {
            merging_add: -1.0,
            ..EnergyTable::default()
        };
        assert!(table.validate().is_err());
    }
}
