//! Seeded synthetic model generation.
//!
//! Layers get a controllable outlier population on top of a bounded uniform
//! base (|w| in [0.5, 1.5]), so the planted outliers are exactly the values
//! crossing the mean + tau*sigma threshold and a zero-fraction layer has no
//! outliers at all. Placement is either clustered (one dense patch per
//! 128x128 tile, driving ND toward 0) or scattered (uniform positions,
//! driving ND toward 1). The mixed profile cycles heavy-clustered,
//! light-clustered and scattered roles so O and ND span their ranges within
//! one model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::store::{DType, Layer, LayerEntry, WeightTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierProfile {
    Clustered,
    Scattered,
    Mixed,
}

impl std::str::FromStr for OutlierProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clustered" => Ok(Self::Clustered),
            "scattered" => Ok(Self::Scattered),
            "mixed" => Ok(Self::Mixed),
            other => Err(format!("unknown profile `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub layers: usize,
    pub rows: usize,
    pub cols: usize,
    pub profile: OutlierProfile,
    /// Overrides the per-role outlier fraction when set.
    pub outlier_fraction: Option<f64>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            layers: 8,
            rows: 256,
            cols: 256,
            profile: OutlierProfile::Mixed,
            outlier_fraction: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Role {
    fraction: f64,
    magnitude: f32,
    clustered: bool,
}

fn role_for(profile: OutlierProfile, layer_index: usize, fraction: Option<f64>) -> Role {
    let base = match profile {
        OutlierProfile::Clustered => Role {
            fraction: 0.01,
            magnitude: 50.0,
            clustered: true,
        },
        OutlierProfile::Scattered => Role {
            fraction: 0.01,
            magnitude: 50.0,
            clustered: false,
        },
        OutlierProfile::Mixed => match layer_index % 4 {
            0 => Role {
                fraction: 0.03,
                magnitude: 100.0,
                clustered: true,
            },
            2 => Role {
                fraction: 0.02,
                magnitude: 10.0,
                clustered: false,
            },
            _ => Role {
                fraction: 0.004,
                magnitude: 30.0,
                clustered: true,
            },
        },
    };
    Role {
        fraction: fraction.unwrap_or(base.fraction),
        ..base
    }
}

fn outlier_value(rng: &mut ChaCha8Rng, magnitude: f32) -> f32 {
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    sign * magnitude * (1.0 + 0.5 * rng.random_range(0.0f32..1.0))
}

fn plant_clustered(data: &mut Matrix<f32>, rng: &mut ChaCha8Rng, fraction: f64, magnitude: f32) {
    let tile = 128usize;
    for tr in 0..data.rows().div_ceil(tile) {
        for tc in 0..data.cols().div_ceil(tile) {
            let h = (data.rows() - tr * tile).min(tile);
            let w = (data.cols() - tc * tile).min(tile);
            let target = (fraction * (h * w) as f64).round() as usize;
            if target == 0 {
                continue;
            }
            let side = ((target as f64).sqrt().ceil() as usize).clamp(1, h.min(w));
            let r0 = tr * tile + rng.random_range(0..=h - side);
            let c0 = tc * tile + rng.random_range(0..=w - side);
            let mut placed = 0;
            'patch: for r in r0..r0 + side {
                for c in c0..c0 + side {
                    if placed == target {
                        break 'patch;
                    }
                    data.set(r, c, outlier_value(rng, magnitude));
                    placed += 1;
                }
            }
        }
    }
}

fn plant_scattered(data: &mut Matrix<f32>, rng: &mut ChaCha8Rng, fraction: f64, magnitude: f32) {
    let target = (fraction * data.len() as f64).round() as usize;
    let mut taken = std::collections::HashSet::new();
    while taken.len() < target {
        let r = rng.random_range(0..data.rows());
        let c = rng.random_range(0..data.cols());
        if taken.insert((r, c)) {
            data.set(r, c, outlier_value(rng, magnitude));
        }
    }
}

/// Generate a deterministic synthetic model: same spec, same bytes.
pub fn generate_model(spec: &SynthSpec) -> Vec<Layer> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.layers)
        .map(|i| {
            let role = role_for(spec.profile, i, spec.outlier_fraction);
            let mut data = Matrix::from_fn(spec.rows, spec.cols, |_, _| {
                let sign = if rng.random_bool(0.5) { 1.0f32 } else { -1.0 };
                sign * rng.random_range(0.5f32..1.5)
            });
            if role.fraction > 0.0 {
                if role.clustered {
                    plant_clustered(&mut data, &mut rng, role.fraction, role.magnitude);
                } else {
                    plant_scattered(&mut data, &mut rng, role.fraction, role.magnitude);
                }
            }
            let name = format!("layer{i:02}");
            Layer {
                entry: LayerEntry {
                    name: name.clone(),
                    rows: spec.rows,
                    cols: spec.cols,
                    dtype: DType::F32,
                    weight_path: format!("{name}.weights.bin"),
                    act_norm_path: None,
                },
                tensor: WeightTensor::with_unit_norms(data).expect("generated weights are finite"),
            }
        })
        .collect()
}
