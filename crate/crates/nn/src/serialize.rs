//! Versioned JSON model files with base64 tensors.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::network::Network;
use crate::params::BnStats;
use crate::{NnError, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Row-major little-endian `f64` data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: String,
}

impl TensorRecord {
    pub fn encode(shape: Vec<usize>, values: impl IntoIterator<Item = f64>) -> Self {
        let bytes: Vec<u8> = values.into_iter().flat_map(f64::to_le_bytes).collect();
        Self { shape, data: STANDARD.encode(bytes) }
    }

    pub fn decode(&self, name: &str) -> Result<Vec<f64>> {
        let bytes = STANDARD.decode(&self.data).map_err(|e| NnError::Format(format!("{name}: {e}")))?;
        let expected: usize = self.shape.iter().product();
        if bytes.len() != expected * 8 {
            return Err(NnError::Format(format!("{name}: {} bytes for shape {:?}", bytes.len(), self.shape)));
        }
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn matrix(&self, name: &str) -> Result<Array2<f64>> {
        let [rows, cols] = self.shape[..] else {
            return Err(NnError::Format(format!("{name}: expected a 2-d shape, got {:?}", self.shape)));
        };
        Array2::from_shape_vec((rows, cols), self.decode(name)?).map_err(|e| NnError::Format(format!("{name}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnRecord {
    pub running_mean: TensorRecord,
    pub running_var: TensorRecord,
}

/// Where a model came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingProvenance {
    pub seed: u64,
    pub epochs: usize,
    /// SHA-256 of the training windows and labels.
    pub data_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEnvelope {
    pub format_version: u32,
    pub config: NetworkConfig,
    pub tensors: BTreeMap<String, TensorRecord>,
    pub batchnorm: Vec<BnRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<TrainingProvenance>,
}

impl ModelEnvelope {
    pub fn from_network(net: &Network, provenance: Option<TrainingProvenance>) -> Self {
        let tensors = net
            .layout
            .specs
            .iter()
            .zip(&net.params)
            .map(|(spec, p)| (spec.name.clone(), TensorRecord::encode(vec![p.nrows(), p.ncols()], p.iter().copied())))
            .collect();
        let vector = |a: &Array1<f64>| TensorRecord::encode(vec![a.len()], a.iter().copied());
        let batchnorm = net
            .bn
            .mean
            .iter()
            .zip(&net.bn.var)
            .map(|(m, v)| BnRecord { running_mean: vector(m), running_var: vector(v) })
            .collect();
        Self { format_version: MODEL_FORMAT_VERSION, config: net.config.clone(), tensors, batchnorm, provenance }
    }

    pub fn into_network(self) -> Result<(Network, Option<TrainingProvenance>)> {
        check_version(self.format_version)?;
        let layout = crate::params::Layout::new(&self.config);
        let params = layout
            .specs
            .iter()
            .map(|spec| {
                self.tensors
                    .get(&spec.name)
                    .ok_or_else(|| NnError::Format(format!("missing tensor {}", spec.name)))?
                    .matrix(&spec.name)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut bn = BnStats { mean: Vec::new(), var: Vec::new() };
        for (l, rec) in self.batchnorm.iter().enumerate() {
            bn.mean.push(Array1::from(rec.running_mean.decode(&format!("batchnorm {l} mean"))?));
            bn.var.push(Array1::from(rec.running_var.decode(&format!("batchnorm {l} var"))?));
        }
        Ok((Network::from_parts(self.config, params, bn)?, self.provenance))
    }
}

pub fn check_version(found: u32) -> Result<()> {
    if found == MODEL_FORMAT_VERSION {
        Ok(())
    } else {
        Err(NnError::UnsupportedVersion { found, expected: MODEL_FORMAT_VERSION })
    }
}

/// Reads `format_version` before the full schema so that files from other
/// versions fail with a version error rather than a schema error.
pub fn parse_versioned<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| NnError::Format("missing format_version".into()))?;
    check_version(u32::try_from(version).unwrap_or(u32::MAX))?;
    Ok(serde_json::from_value(value)?)
}

pub fn model_to_json(net: &Network, provenance: Option<TrainingProvenance>) -> Result<String> {
    Ok(serde_json::to_string(&ModelEnvelope::from_network(net, provenance))?)
}

pub fn model_from_json(text: &str) -> Result<(Network, Option<TrainingProvenance>)> {
    parse_versioned::<ModelEnvelope>(text)?.into_network()
}

pub fn save_model(path: impl AsRef<Path>, net: &Network, provenance: Option<TrainingProvenance>) -> Result<()> {
    std::fs::write(path, model_to_json(net, provenance)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(Network, Option<TrainingProvenance>)> {
    model_from_json(&std::fs::read_to_string(path)?)
}
