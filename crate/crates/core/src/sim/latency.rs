//! Analytic cycle model of the macro's row/column pipelining.
//!
//! Pinned schedule, per column tile and row tile:
//!   - column c is activated at cycle `c * stages`; feeding its rows takes
//!     `stages` cycles at R rows per cycle;
//!   - a column's bit-serial MAC completes `bitserial_cycles` after its last
//!     row-group feed, so one token's pass over Y columns costs
//!     `Y * stages + bitserial_cycles`;
//!   - tokens pipeline back-to-back at `Y * stages` per token, paying the
//!     drain once per tile;
//!   - a partially occupied row tile needs only
//!     `ceil(ceil(slots / P) / R)` feed stages.
//!
//! Total: sum over row tiles of `tokens * Y * stages_tile + drain`, times
//! the column tile count.

use crate::error::Result;
use crate::pattern::PatternChoice;

use super::{column_slots, rows_per_cycle, tile_counts, LayerDims, MacroConfig};

/// Cycles to run one layer's GEMM under `pattern`.
pub fn latency_model(dims: LayerDims, pattern: PatternChoice, cfg: &MacroConfig) -> Result<u64> {
    let schedule = rows_per_cycle(pattern, cfg)?;
    let tiles = tile_counts(dims, pattern, cfg);
    if tiles.total() == 0 || dims.tokens == 0 {
        return Ok(0);
    }
    let slots = column_slots(dims.c_in, pattern);
    let mut total = 0u64;
    for tile in 0..tiles.row_tiles {
        let tile_slots = (slots - (tile as usize) * cfg.x).min(cfg.x);
        let occupied_rows = tile_slots.div_ceil(cfg.p);
        let stages = occupied_rows.div_ceil(schedule.rows_per_cycle).max(1) as u64;
        total += dims.tokens as u64 * cfg.y as u64 * stages + u64::from(cfg.bitserial_cycles);
    }
    Ok(total * tiles.col_tiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(n: u8, m: u8) -> PatternChoice {
        PatternChoice::new(n, m).unwrap()
    }

    #[test]
    fn dense_full_tile_hand_count() {
        // 32 column activations one stage apart plus the 8-cycle final MAC.
        let cfg = MacroConfig::default();
        let cycles = latency_model(LayerDims::new(128, 32, 1), pattern(8, 8), &cfg).unwrap();
        assert_eq!(cycles, 40);
    }

    #[test]
    fn one_of_eight_single_tile_hand_count() {
        // 1024 channels compress to 128 stored rows: one tile at 8 stages.
        let cfg = MacroConfig::default();
        let dims = LayerDims::new(1024, 32, 1);
        let sparse = latency_model(dims, pattern(1, 8), &cfg).unwrap();
        assert_eq!(sparse, 32 * 8 + 8);
        // The dense schedule needs 8 row tiles of 40 cycles each.
        let dense = latency_model(dims, pattern(8, 8), &cfg).unwrap();
        assert_eq!(dense, 8 * 40);
        assert!(sparse < dense);
    }

    #[test]
    fn token_count_scales_steady_state_cycles() {
        let cfg = MacroConfig::default();
        let dims1 = LayerDims::new(512, 64, 3);
        let dims2 = LayerDims::new(512, 64, 6);
        for p in PatternChoice::candidate_set() {
            let c1 = latency_model(dims1, p, &cfg).unwrap();
            let c2 = latency_model(dims2, p, &cfg).unwrap();
            let drain = tile_counts(dims1, p, &cfg).total() * u64::from(cfg.bitserial_cycles);
            // Doubling tokens doubles everything except the per-tile drain.
            assert_eq!(c2, 2 * c1 - drain, "pattern {p}");
        }
    }

    #[test]
    fn cycles_non_decreasing_in_n_for_fixed_m() {
        let cfg = MacroConfig::default();
        for &c_in in &[64usize, 128, 600, 1024] {
            for &m in &[4u8, 8] {
                let mut last = 0u64;
                for n in [1u8, 2, 4, 8] {
                    if n > m {
                        continue;
                    }
                    let p = pattern(n, m);
                    let c = latency_model(LayerDims::new(c_in, 32, 4), p, &cfg).unwrap();
                    assert!(c >= last, "c_in {c_in} pattern {p}: {c} < {last}");
                    last = c;
                }
            }
        }
    }

    #[test]
    fn sparse_never_slower_than_dense() {
        let cfg = MacroConfig::default();
        for &c_in in &[8usize, 17, 64, 128, 129, 250, 512, 777, 1024] {
            for &c_out in &[1usize, 16, 32, 33, 64] {
                for &tokens in &[1usize, 5, 16] {
                    let dims = LayerDims::new(c_in, c_out, tokens);
                    let dense = latency_model(dims, pattern(8, 8), &cfg).unwrap();
                    for p in PatternChoice::candidate_set() {
                        let c = latency_model(dims, p, &cfg).unwrap();
                        assert!(
                            c <= dense,
                            "{p} on {c_in}x{c_out}x{tokens}: {c} > dense {dense}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_sized_layers_cost_nothing() {
        let cfg = MacroConfig::default();
        assert_eq!(
            latency_model(LayerDims::new(0, 32, 4), pattern(1, 2), &cfg).unwrap(),
            0
        );
        assert_eq!(
            latency_model(LayerDims::new(128, 0, 4), pattern(1, 2), &cfg).unwrap(),
            0
        );
        assert_eq!(
            latency_model(LayerDims::new(128, 32, 0), pattern(1, 2), &cfg).unwrap(),
            0
        );
    }

    #[test]
    fn all_dense_variants_share_one_schedule() {
        let cfg = MacroConfig::default();
        for &c_in in &[5usize, 121, 128, 250, 1000] {
            let dims = LayerDims::new(c_in, 48, 3);
            let reference = latency_model(dims, pattern(8, 8), &cfg).unwrap();
            for m in [2u8, 4] {
                assert_eq!(latency_model(dims, pattern(m, m), &cfg).unwrap(), reference);
            }
        }
    }
}
