//! Checkpoint serialization: a single JSON document holding every parameter,
//! the batch-norm running statistics, and enough provenance to reproduce and
//! audit a run. Floats round-trip losslessly through the decimal encoding.

use super::{BatchNormLayer, DenseLayer, Matrix, NetworkParams, TrainConfig};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseWeights {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BnStats {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

/// On-disk model format. The field set is frozen; bumping it requires a new
/// `format_version`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub topology: Vec<usize>,
    pub weights: Vec<DenseWeights>,
    pub bn_stats: Vec<BnStats>,
    pub feature_order: Vec<String>,
    pub functional_order: Vec<String>,
    pub train_config: TrainConfig,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub corpus_fingerprint: String,
}

impl ModelCheckpoint {
    pub fn from_params(
        params: &NetworkParams,
        train_config: TrainConfig,
        best_val_loss: f64,
        best_epoch: usize,
        corpus_fingerprint: String,
    ) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            topology: params.widths.clone(),
            weights: params
                .dense
                .iter()
                .map(|d| DenseWeights {
                    weights: d.weights.iter_rows().map(|r| r.to_vec()).collect(),
                    bias: d.bias.clone(),
                })
                .collect(),
            bn_stats: params
                .bn
                .iter()
                .map(|b| BnStats {
                    gamma: b.gamma.clone(),
                    beta: b.beta.clone(),
                    running_mean: b.running_mean.clone(),
                    running_var: b.running_var.clone(),
                    momentum: b.momentum,
                    epsilon: b.epsilon,
                })
                .collect(),
            feature_order: crate::dsp::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            functional_order: crate::segmentation::FUNCTIONAL_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            train_config,
            best_val_loss,
            best_epoch,
            corpus_fingerprint,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.topology.get(2).copied().unwrap_or(0)
    }

    pub fn input_dim(&self) -> usize {
        self.topology.first().copied().unwrap_or(0)
    }

    /// Rebuild network parameters, validating that every stored tensor is
    /// consistent with the declared topology.
    pub fn params(&self) -> Result<NetworkParams> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        NetworkParams::validate_widths(&self.topology)?;
        if self.weights.len() != 4 || self.bn_stats.len() != 3 {
            return Err(Error::Checkpoint(format!(
                "expected 4 dense + 3 bn layers, got {} + {}",
                self.weights.len(),
                self.bn_stats.len()
            )));
        }
        let dims: [(usize, usize); 4] = [
            (self.topology[1], self.topology[0]),
            (self.topology[2], self.topology[1]),
            (self.topology[3], self.topology[2]),
            (self.topology[4], self.topology[3]),
        ];
        let mut dense = Vec::with_capacity(4);
        for (layer, &(out_dim, in_dim)) in self.weights.iter().zip(&dims) {
            if layer.weights.len() != out_dim
                || layer.weights.iter().any(|r| r.len() != in_dim)
                || layer.bias.len() != out_dim
            {
                return Err(Error::Checkpoint(format!(
                    "dense layer shape mismatch: expected {out_dim}x{in_dim}"
                )));
            }
            let flat: Vec<f64> = layer.weights.iter().flatten().copied().collect();
            dense.push(DenseLayer {
                weights: Matrix::from_vec(out_dim, in_dim, flat),
                bias: layer.bias.clone(),
            });
        }
        let bn_dims = [self.topology[1], self.topology[2], self.topology[3]];
        let mut bn = Vec::with_capacity(3);
        for (stats, &dim) in self.bn_stats.iter().zip(&bn_dims) {
            if stats.gamma.len() != dim
                || stats.beta.len() != dim
                || stats.running_mean.len() != dim
                || stats.running_var.len() != dim
            {
                return Err(Error::Checkpoint(format!(
                    "bn layer shape mismatch: expected width {dim}"
                )));
            }
            bn.push(BatchNormLayer {
                gamma: stats.gamma.clone(),
                beta: stats.beta.clone(),
                running_mean: stats.running_mean.clone(),
                running_var: stats.running_var.clone(),
                momentum: stats.momentum,
                epsilon: stats.epsilon,
            });
        }
        let params = NetworkParams {
            widths: self.topology.clone(),
            dense,
            bn,
        };
        if !params.is_finite() {
            return Err(Error::Checkpoint(
                "checkpoint contains non-finite parameters".to_string(),
            ));
        }
        Ok(params)
    }
}

pub fn save_checkpoint(checkpoint: &ModelCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    checkpoint.params()?; // refuse to persist an inconsistent model
    let json = serde_json::to_string(checkpoint)
        .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
    crate::io::write_text(path, &json)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelCheckpoint> {
    let path = path.as_ref();
    let text = crate::io::read_text(path)?;
    let checkpoint: ModelCheckpoint = serde_json::from_str(&text).map_err(|e| {
        Error::Checkpoint(format!("parse {}: {e}", path.display()))
    })?;
    checkpoint.params()?; // surface dimension problems at load time
    Ok(checkpoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{forward, Mode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_checkpoint(widths: &[usize], seed: u64) -> ModelCheckpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = NetworkParams::init(widths, &mut rng).unwrap();
        ModelCheckpoint::from_params(
            &params,
            TrainConfig {
                widths: widths.to_vec(),
                ..TrainConfig::default()
            },
            0.5,
            3,
            "test".to_string(),
        )
    }

    #[test]
    fn round_trip_preserves_inference_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let checkpoint = random_checkpoint(&[228, 128, 30, 128, 228], 9);
        save_checkpoint(&checkpoint, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut probe = Matrix::zeros(3, 228);
        for v in probe.data_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
        let mut p1 = checkpoint.params().unwrap();
        let mut p2 = loaded.params().unwrap();
        let out1 = forward(&mut p1, &probe, Mode::Infer).unwrap();
        let out2 = forward(&mut p2, &probe, Mode::Infer).unwrap();
        assert_eq!(out1.z, out2.z);
        assert_eq!(out1.x_hat, out2.x_hat);
    }

    #[test]
    fn truncated_file_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let checkpoint = random_checkpoint(&[8, 6, 3, 6, 8], 2);
        save_checkpoint(&checkpoint, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn non_default_embedding_dim_loads_if_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let checkpoint = random_checkpoint(&[50, 20, 7, 20, 50], 4);
        save_checkpoint(&checkpoint, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.embedding_dim(), 7);
        assert!(loaded.params().is_ok());
    }

    #[test]
    fn inconsistent_dims_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut checkpoint = random_checkpoint(&[8, 6, 3, 6, 8], 5);
        checkpoint.weights[1].bias.push(0.0);
        let json = serde_json::to_string(&checkpoint).unwrap();
        std::fs::write(&path, json).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
