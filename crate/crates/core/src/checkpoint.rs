//! Trained-model persistence and the window -> force estimator built on it.

use crate::dsp::{DspError, ForceWindow};
use crate::features::{FeatureExtractor, FeatureKind, Normalization};
use crate::neural::{Architecture, Conv1d, Dense, FnnParams, Network, NeuralError, TdnnParams};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Estimator families compared in the evaluation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// 5 Hz first-order low-pass, no training.
    Lpf,
    Fnn,
    Cnn,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Lpf => "lpf",
            ModelKind::Fnn => "fnn",
            ModelKind::Cnn => "cnn",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lpf" => Ok(ModelKind::Lpf),
            "fnn" => Ok(ModelKind::Fnn),
            "cnn" | "tdnn" => Ok(ModelKind::Cnn),
            other => Err(format!("unknown model '{other}' (lpf, fnn, cnn)")),
        }
    }
}

impl ModelKind {
    /// Network topology for a feature, `None` for the LPF.
    pub fn architecture(&self, feature: FeatureKind) -> Option<Architecture> {
        let (rows, cols) = feature.input_shape();
        match self {
            ModelKind::Lpf => None,
            ModelKind::Fnn => Some(Architecture::Fnn { input_width: rows * cols }),
            ModelKind::Cnn => Some(Architecture::Tdnn { input_len: rows, in_channels: cols }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// JSON document holding everything needed to rebuild an [`Estimator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model_kind: ModelKind,
    pub feature: FeatureKind,
    pub architecture: Architecture,
    pub input_shape: (usize, usize),
    pub tensors: Vec<NamedTensor>,
    pub normalization: Normalization,
    pub seed: u64,
    pub epochs: usize,
}

fn conv_tensors(prefix: &str, c: &Conv1d, out: &mut Vec<NamedTensor>) {
    out.push(NamedTensor { name: format!("{prefix}.weight"), shape: vec![c.c_out, c.c_in, c.k], values: c.weight.clone() });
    out.push(NamedTensor { name: format!("{prefix}.bias"), shape: vec![c.c_out], values: c.bias.clone() });
}

fn dense_tensors(prefix: &str, d: &Dense, out: &mut Vec<NamedTensor>) {
    out.push(NamedTensor { name: format!("{prefix}.weight"), shape: vec![d.n_out, d.n_in], values: d.weight.clone() });
    out.push(NamedTensor { name: format!("{prefix}.bias"), shape: vec![d.n_out], values: d.bias.clone() });
}

fn take(tensors: &[NamedTensor], name: &str, dst: &mut [f64], shape: &[usize]) -> Result<(), CheckpointError> {
    let t = tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| CheckpointError::Shape(format!("missing tensor {name}")))?;
    if t.shape != shape || t.values.len() != dst.len() {
        return Err(CheckpointError::Shape(format!(
            "tensor {name}: checkpoint has {:?} ({} values), model wants {:?}",
            t.shape,
            t.values.len(),
            shape
        )));
    }
    dst.copy_from_slice(&t.values);
    Ok(())
}

fn load_conv(tensors: &[NamedTensor], prefix: &str, c: &mut Conv1d) -> Result<(), CheckpointError> {
    let shape = [c.c_out, c.c_in, c.k];
    take(tensors, &format!("{prefix}.weight"), &mut c.weight, &shape)?;
    take(tensors, &format!("{prefix}.bias"), &mut c.bias, &[c.c_out])
}

fn load_dense(tensors: &[NamedTensor], prefix: &str, d: &mut Dense) -> Result<(), CheckpointError> {
    let shape = [d.n_out, d.n_in];
    take(tensors, &format!("{prefix}.weight"), &mut d.weight, &shape)?;
    take(tensors, &format!("{prefix}.bias"), &mut d.bias, &[d.n_out])
}

impl Checkpoint {
    pub fn new(
        model_kind: ModelKind,
        feature: FeatureKind,
        network: &Network,
        normalization: Normalization,
        seed: u64,
        epochs: usize,
    ) -> Self {
        let mut tensors = Vec::new();
        match network {
            Network::Tdnn(p) => {
                conv_tensors("conv1", &p.conv1, &mut tensors);
                conv_tensors("conv2", &p.conv2, &mut tensors);
                dense_tensors("fc1", &p.fc1, &mut tensors);
                dense_tensors("fc2", &p.fc2, &mut tensors);
                dense_tensors("fc3", &p.fc3, &mut tensors);
            }
            Network::Fnn(p) => {
                dense_tensors("fc1", &p.fc1, &mut tensors);
                dense_tensors("fc2", &p.fc2, &mut tensors);
                dense_tensors("fc3", &p.fc3, &mut tensors);
            }
        }
        Self {
            model_kind,
            feature,
            architecture: network.architecture(),
            input_shape: feature.input_shape(),
            tensors,
            normalization,
            seed,
            epochs,
        }
    }

    /// Rebuilds the network, checking every tensor shape.
    pub fn network(&self) -> Result<Network, CheckpointError> {
        if self.model_kind.architecture(self.feature) != Some(self.architecture) {
            return Err(CheckpointError::Shape(format!(
                "{} on {} needs {:?}, checkpoint declares {:?}",
                self.model_kind,
                self.feature,
                self.model_kind.architecture(self.feature),
                self.architecture
            )));
        }
        let mut net = Network::zeros(self.architecture)?;
        match &mut net {
            Network::Tdnn(TdnnParams { conv1, conv2, fc1, fc2, fc3, .. }) => {
                load_conv(&self.tensors, "conv1", conv1)?;
                load_conv(&self.tensors, "conv2", conv2)?;
                load_dense(&self.tensors, "fc1", fc1)?;
                load_dense(&self.tensors, "fc2", fc2)?;
                load_dense(&self.tensors, "fc3", fc3)?;
            }
            Network::Fnn(FnnParams { fc1, fc2, fc3 }) => {
                load_dense(&self.tensors, "fc1", fc1)?;
                load_dense(&self.tensors, "fc2", fc2)?;
                load_dense(&self.tensors, "fc3", fc3)?;
            }
        }
        let width = self.input_shape.1;
        let want = match self.feature {
            FeatureKind::Raw => 1,
            _ => width,
        };
        if self.normalization.mean.len() != want || self.normalization.std.len() != want {
            return Err(CheckpointError::Shape(format!(
                "normalisation has {} channels, feature {} has {want}",
                self.normalization.mean.len(),
                self.feature
            )));
        }
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, CheckpointError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        crate::experiment::write_atomic(path, self.to_json().as_bytes())
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let s = std::fs::read_to_string(path)
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&s)
    }
}

/// Trained network plus its feature pipeline.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub model_kind: ModelKind,
    pub network: Network,
    pub extractor: FeatureExtractor,
    pub normalization: Normalization,
}

impl Estimator {
    pub fn new(model_kind: ModelKind, feature: FeatureKind, network: Network, normalization: Normalization) -> Self {
        Self { model_kind, network, extractor: FeatureExtractor::new(feature), normalization }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, CheckpointError> {
        Ok(Self::new(ckpt.model_kind, ckpt.feature, ckpt.network()?, ckpt.normalization.clone()))
    }

    pub fn feature(&self) -> FeatureKind {
        self.extractor.kind()
    }

    /// Normalised network input for one window.
    pub fn input(&self, window: &ForceWindow) -> Result<crate::neural::Tensor2, CheckpointError> {
        let mut x = self.extractor.extract(window)?;
        self.normalization.apply(&mut x);
        Ok(x)
    }

    pub fn estimate(&self, window: &ForceWindow) -> Result<f64, CheckpointError> {
        Ok(self.network.forward(&self.input(window)?)?)
    }
}
