//! On-disk model container: JSON manifest plus raw little-endian payloads.
//!
//! The manifest holds all shape/dtype metadata; payload files are headerless
//! row-major arrays. A weight payload is `rows * cols` elements, an optional
//! activation-norm payload is `rows` f32 elements (per-input-channel L2 norms
//! of calibration activations). Layers without a norm payload default to
//! all-ones norms, which degrades the importance score to plain magnitude.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    I8,
}

impl DType {
    pub fn size_bytes(&self) -> usize {
        match self {
            DType::F32 => 4,
            DType::I8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub dtype: DType,
    pub weight_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act_norm_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub model_name: String,
    pub format_version: u32,
    pub layers: Vec<LayerEntry>,
}

impl ModelManifest {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(self.format_version));
        }
        let mut seen = std::collections::HashSet::new();
        for entry in &self.layers {
            if entry.name.is_empty() {
                return Err(Error::Manifest("empty layer name".into()));
            }
            if !seen.insert(entry.name.as_str()) {
                return Err(Error::Manifest(format!(
                    "duplicate layer name `{}`",
                    entry.name
                )));
            }
            if entry.rows == 0 || entry.cols == 0 {
                return Err(
                    Error::Manifest(format!("layer `{}` has zero dimension", entry.name)),
                );
            }
        }
        Ok(())
    }
}

/// A dense weight matrix with per-input-channel activation norms.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor<T> {
    pub data: Matrix<T>,
    pub act_norms: Vec<T>,
}

impl<T: Real> WeightTensor<T> {
    /// Validates finiteness of weights and non-negativity of norms.
    pub fn new(data: Matrix<T>, act_norms: Vec<T>) -> Result<Self> {
        if act_norms.len() != data.rows() {
            return Err(Error::ShapeMismatch {
                expected: data.rows(),
                found: act_norms.len(),
            });
        }
        for (index, v) in data.as_slice().iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index });
            }
        }
        for (index, &n) in act_norms.iter().enumerate() {
            if !n.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if n < T::zero() {
                return Err(Error::NegativeNorm { index });
            }
        }
        Ok(Self { data, act_norms })
    }

    /// All-ones norms (pure magnitude pruning).
    pub fn with_unit_norms(data: Matrix<T>) -> Result<Self> {
        let norms = vec![T::one(); data.rows()];
        Self::new(data, norms)
    }
}

/// A named layer as loaded from a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub entry: LayerEntry,
    pub tensor: WeightTensor<f32>,
}

/// Per-input-channel L2 norms over a calibration activation matrix of shape
/// `(samples, C_in)`: element j is `sqrt(sum_s activations[s][j]^2)`.
pub fn compute_act_norms<T: Real>(activations: &Matrix<T>) -> Result<Vec<T>> {
    if activations.rows() == 0 {
        return Err(Error::EmptyActivations);
    }
    let mut sums = vec![T::zero(); activations.cols()];
    for s in 0..activations.rows() {
        let row = activations.row(s);
        for (j, &v) in row.iter().enumerate() {
            sums[j] += v * v;
        }
    }
    Ok(sums.into_iter().map(|v| v.sqrt()).collect())
}

fn read_f32_payload(path: &Path, expected_elems: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected_elems * 4 {
        return Err(Error::PayloadSize {
            expected: expected_elems * 4,
            found: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn read_i8_payload(path: &Path, expected_elems: usize) -> Result<Vec<i8>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected_elems {
        return Err(Error::PayloadSize {
            expected: expected_elems,
            found: bytes.len(),
        });
    }
    Ok(bytes.into_iter().map(|b| b as i8).collect())
}

fn write_f32_payload(path: &Path, values: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    base.join(rel)
}

fn load_layer(base: &Path, entry: &LayerEntry) -> Result<WeightTensor<f32>> {
    let elems = entry.rows * entry.cols;
    let weight_path = resolve(base, &entry.weight_path);
    let values: Vec<f32> = match entry.dtype {
        DType::F32 => read_f32_payload(&weight_path, elems)?,
        // i8 payloads convert exactly; they are only meaningful to the
        // simulator but share the container format.
        DType::I8 => read_i8_payload(&weight_path, elems)?
            .into_iter()
            .map(f32::from)
            .collect(),
    };
    let data = Matrix::from_vec(entry.rows, entry.cols, values)?;
    let norms = match &entry.act_norm_path {
        Some(rel) => read_f32_payload(&resolve(base, rel), entry.rows)?,
        None => vec![1.0; entry.rows],
    };
    WeightTensor::new(data, norms)
}

/// Load a manifest and all referenced payloads, in manifest order.
///
/// Every failure is tagged with the offending layer's name.
pub fn load_model(manifest_path: &Path) -> Result<Vec<Layer>> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: ModelManifest = serde_json::from_str(&text)?;
    manifest.validate()?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let tensor = load_layer(base, entry).map_err(|e| e.for_layer(&entry.name))?;
        layers.push(Layer {
            entry: entry.clone(),
            tensor,
        });
    }
    Ok(layers)
}

/// Write payloads and a manifest such that `load_model` reproduces `layers`
/// byte-for-byte. Payload paths come from each entry; parent directories are
/// created as needed. i8 entries are written from the rounded f32 values.
pub fn save_model(model_name: &str, layers: &[Layer], manifest_path: &Path) -> Result<()> {
    let manifest = ModelManifest {
        model_name: model_name.to_string(),
        format_version: FORMAT_VERSION,
        layers: layers.iter().map(|l| l.entry.clone()).collect(),
    };
    manifest.validate()?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(base)?;
    for layer in layers {
        let entry = &layer.entry;
        let result: Result<()> = (|| {
            let expected = entry.rows * entry.cols;
            if layer.tensor.data.len() != expected {
                return Err(Error::ShapeMismatch {
                    expected,
                    found: layer.tensor.data.len(),
                });
            }
            let weight_path = resolve(base, &entry.weight_path);
            if let Some(parent) = weight_path.parent() {
                fs::create_dir_all(parent)?;
            }
            match entry.dtype {
                DType::F32 => write_f32_payload(&weight_path, layer.tensor.data.as_slice())?,
                DType::I8 => {
                    let bytes: Vec<u8> = layer
                        .tensor
                        .data
                        .as_slice()
                        .iter()
                        .map(|&v| (v.round().clamp(-128.0, 127.0) as i8) as u8)
                        .collect();
                    fs::write(&weight_path, bytes)?;
                }
            }
            if let Some(rel) = &entry.act_norm_path {
                let norm_path = resolve(base, rel);
                if let Some(parent) = norm_path.parent() {
                    fs::create_dir_all(parent)?;
                }
                write_f32_payload(&norm_path, &layer.tensor.act_norms)?;
            }
            Ok(())
        })();
        result.map_err(|e| e.for_layer(&entry.name))?;
    }
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(manifest_path, json)?;
    Ok(())
}
