//! Whole-model simulation across all architectures, with totals and ratios
//! normalized against each family's dense design.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::SparsityPlan;

use super::baseline::{baseline_model, ArchId, SystolicConfig, DENSE_PATTERN, SDP_PATTERN};
use super::energy::{stored_values, EnergyBreakdown, EnergyTable};
use super::{tile_counts, LayerDims, MacroConfig};

/// Bundled simulator configuration, loadable from one JSON file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    #[serde(rename = "macro")]
    pub macro_config: MacroConfig,
    pub systolic: SystolicConfig,
    pub energy: EnergyTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyJson {
    pub compute: f64,
    pub local: f64,
    pub global: f64,
}

impl From<&EnergyBreakdown> for EnergyJson {
    fn from(e: &EnergyBreakdown) -> Self {
        Self {
            compute: e.compute,
            local: e.local_memory,
            global: e.global_memory,
        }
    }
}

impl EnergyJson {
    pub fn total(&self) -> f64 {
        self.compute + self.local + self.global
    }

    fn add(&mut self, other: &EnergyJson) {
        self.compute += other.compute;
        self.local += other.local;
        self.global += other.global;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSimRecord {
    pub name: String,
    pub arch: ArchId,
    #[serde(rename = "N")]
    pub n: u8,
    #[serde(rename = "M")]
    pub m: u8,
    pub cycles: u64,
    pub tiles: u64,
    pub utilization: f64,
    pub energy: EnergyJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchTotals {
    pub arch: ArchId,
    pub cycles: u64,
    pub energy: EnergyJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedEntry {
    pub arch: ArchId,
    /// Cycle ratio against the family's dense design.
    pub cycles: f64,
    /// Total-energy ratio against the family's dense design.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub seed: u64,
    pub tokens: usize,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub header: ReportHeader,
    pub per_layer: Vec<LayerSimRecord>,
    pub totals: Vec<ArchTotals>,
    pub normalized_vs_dense: Vec<NormalizedEntry>,
}

fn useful_macs(arch: ArchId, dims: LayerDims, pattern: crate::pattern::PatternChoice) -> u64 {
    let effective = match arch {
        ArchId::Flexcim | ArchId::FlexibleDigital => pattern,
        ArchId::DenseDcim | ArchId::DenseSystolic => DENSE_PATTERN,
        ArchId::Sdp1to2 => {
            if pattern == SDP_PATTERN {
                SDP_PATTERN
            } else {
                DENSE_PATTERN
            }
        }
    };
    stored_values(dims, effective) * dims.tokens as u64
}

fn peak_for(arch: ArchId, cfg: &SimConfig) -> f64 {
    match arch {
        ArchId::DenseSystolic | ArchId::FlexibleDigital => cfg.systolic.peak_macs_per_cycle(),
        _ => cfg.macro_config.peak_macs_per_cycle(),
    }
}

/// Simulate every layer of a plan on every architecture. The plan must
/// cover each named layer; totals are per-layer sums and ratios normalize
/// against the family dense baseline.
pub fn simulate_model(
    plan: &SparsityPlan,
    layers: &[(String, LayerDims)],
    cfg: &SimConfig,
    seed: u64,
) -> Result<SimReport> {
    let tokens = layers.first().map_or(0, |(_, d)| d.tokens);
    let mut per_layer = Vec::new();
    let mut totals: Vec<ArchTotals> = ArchId::ALL
        .iter()
        .map(|&arch| ArchTotals {
            arch,
            cycles: 0,
            energy: EnergyJson::default(),
        })
        .collect();
    for (name, dims) in layers {
        let pattern = plan
            .pattern_for(name)
            .ok_or_else(|| Error::Simulator(format!("plan has no assignment for layer `{name}`")))?;
        for (slot, &arch) in ArchId::ALL.iter().enumerate() {
            let (cycles, energy) = baseline_model(
                arch,
                *dims,
                pattern,
                &cfg.macro_config,
                &cfg.systolic,
                &cfg.energy,
            )
            .map_err(|e| e.for_layer(name))?;
            let energy_json = EnergyJson::from(&energy);
            let utilization = if cycles == 0 {
                0.0
            } else {
                useful_macs(arch, *dims, pattern) as f64 / (cycles as f64 * peak_for(arch, cfg))
            };
            let tiles = match arch {
                ArchId::DenseSystolic | ArchId::FlexibleDigital => {
                    (dims.c_in.div_ceil(cfg.systolic.dim) * dims.c_out.div_ceil(cfg.systolic.dim))
                        as u64
                }
                ArchId::DenseDcim => tile_counts(*dims, DENSE_PATTERN, &cfg.macro_config).total(),
                ArchId::Sdp1to2 => {
                    let eff = if pattern == SDP_PATTERN { SDP_PATTERN } else { DENSE_PATTERN };
                    tile_counts(*dims, eff, &cfg.macro_config).total()
                }
                ArchId::Flexcim => tile_counts(*dims, pattern, &cfg.macro_config).total(),
            };
            totals[slot].cycles += cycles;
            totals[slot].energy.add(&energy_json);
            per_layer.push(LayerSimRecord {
                name: name.clone(),
                arch,
                n: pattern.n,
                m: pattern.m,
                cycles,
                tiles,
                utilization,
                energy: energy_json,
            });
        }
    }
    let reference = |arch: ArchId| -> &ArchTotals {
        let dense = arch.dense_reference();
        totals.iter().find(|t| t.arch == dense).unwrap()
    };
    let normalized_vs_dense = ArchId::ALL
        .iter()
        .map(|&arch| {
            let own = totals.iter().find(|t| t.arch == arch).unwrap();
            let base = reference(arch);
            NormalizedEntry {
                arch,
                cycles: ratio(own.cycles as f64, base.cycles as f64),
                energy: ratio(own.energy.total(), base.energy.total()),
            }
        })
        .collect();
    Ok(SimReport {
        header: ReportHeader {
            seed,
            tokens,
            config: cfg.clone(),
        },
        per_layer,
        totals,
        normalized_vs_dense,
    })
}

fn ratio(value: f64, base: f64) -> f64 {
    if base == 0.0 {
        if value == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        value / base
    }
}

impl SimReport {
    /// Flat CSV: one row per (layer, architecture), then totals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "layer,arch,N,M,cycles,tiles,utilization,energy_compute,energy_local,energy_global\n",
        );
        for r in &self.per_layer {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6},{:.3},{:.3},{:.3}\n",
                r.name,
                r.arch,
                r.n,
                r.m,
                r.cycles,
                r.tiles,
                r.utilization,
                r.energy.compute,
                r.energy.local,
                r.energy.global
            ));
        }
        for t in &self.totals {
            out.push_str(&format!(
                "TOTAL,{},,,{},,,{:.3},{:.3},{:.3}\n",
                t.arch, t.cycles, t.energy.compute, t.energy.local, t.energy.global
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::PatternChoice;
    use crate::planner::{Assignment, PlanMode};

    fn plan_of(patterns: &[(&str, u8, u8)]) -> SparsityPlan {
        SparsityPlan {
            mode: PlanMode::Unconstrained,
            target: None,
            achieved_sparsity: 0.0,
            objective_value: 0.0,
            deviation_from_target: 0.0,
            assignments: patterns
                .iter()
                .map(|&(name, n, m)| Assignment {
                    layer: name.into(),
                    pattern: PatternChoice::new(n, m).unwrap(),
                })
                .collect(),
        }
    }

    fn dims(c_in: usize, c_out: usize, tokens: usize) -> LayerDims {
        LayerDims::new(c_in, c_out, tokens)
    }

    #[test]
    fn all_dense_plan_normalizes_to_unity_everywhere() {
        let plan = plan_of(&[("a", 8, 8), ("b", 4, 4), ("c", 2, 2)]);
        let layers = vec![
            ("a".to_string(), dims(256, 64, 4)),
            ("b".to_string(), dims(128, 32, 4)),
            ("c".to_string(), dims(300, 48, 4)),
        ];
        let report = simulate_model(&plan, &layers, &SimConfig::default(), 0).unwrap();
        for entry in &report.normalized_vs_dense {
            assert_eq!(entry.cycles, 1.0, "{}", entry.arch);
            assert_eq!(entry.energy, 1.0, "{}", entry.arch);
        }
    }

    #[test]
    fn totals_are_per_layer_sums() {
        let plan = plan_of(&[("a", 1, 8), ("b", 2, 4), ("c", 8, 8)]);
        let layers = vec![
            ("a".to_string(), dims(512, 64, 2)),
            ("b".to_string(), dims(256, 32, 2)),
            ("c".to_string(), dims(128, 16, 2)),
        ];
        let report = simulate_model(&plan, &layers, &SimConfig::default(), 0).unwrap();
        for arch in ArchId::ALL {
            let sum: u64 = report
                .per_layer
                .iter()
                .filter(|r| r.arch == arch)
                .map(|r| r.cycles)
                .sum();
            let total = report.totals.iter().find(|t| t.arch == arch).unwrap();
            assert_eq!(total.cycles, sum, "{arch}");
        }
    }

    #[test]
    fn homogeneous_plan_speedup_equals_single_layer_speedup() {
        let plan = plan_of(&[("a", 1, 8), ("b", 1, 8), ("c", 1, 8)]);
        let layer = dims(1024, 32, 1);
        let layers: Vec<(String, LayerDims)> = ["a", "b", "c"]
            .iter()
            .map(|n| (n.to_string(), layer))
            .collect();
        let report = simulate_model(&plan, &layers, &SimConfig::default(), 0).unwrap();
        let flex = report
            .normalized_vs_dense
            .iter()
            .find(|e| e.arch == ArchId::Flexcim)
            .unwrap();
        assert_eq!(flex.cycles, 264.0 / 320.0);
    }

    #[test]
    fn missing_layer_in_plan_is_an_error() {
        let plan = plan_of(&[("a", 1, 8)]);
        let layers = vec![
            ("a".to_string(), dims(128, 32, 1)),
            ("mystery".to_string(), dims(128, 32, 1)),
        ];
        let err = simulate_model(&plan, &layers, &SimConfig::default(), 0).unwrap_err();
        assert!(err.to_string().contains("mystery"));
    }

    #[test]
    fn report_json_roundtrips() {
        let plan = plan_of(&[("a", 2, 8)]);
        let layers = vec![("a".to_string(), dims(256, 40, 3))];
        let report = simulate_model(&plan, &layers, &SimConfig::default(), 9).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: SimReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(json.contains("\"flexcim\""));
        assert!(json.contains("normalized_vs_dense"));
        let csv = report.to_csv();
        assert!(csv.lines().count() >= 1 + ArchId::ALL.len() * 2);
    }
}
