//! Experiment orchestration behind the command-line tool: dataset files,
//! training runs, RMSE tables, closed-loop runs and plot data.

mod evaluate;
mod plots;

pub use evaluate::{
    evaluate_column, predict_lpf, rmse, run_grid, train_column, Column, DatasetSet, Predictor, SeedResult,
};
pub use plots::{hysteresis_loop, mel_heatmap, rmse_bars, run_log_traces};

use crate::checkpoint::{CheckpointError, ModelKind};
use crate::control::ControlError;
use crate::features::FeatureKind;
use crate::neural::NeuralError;
use crate::plant::{DatasetError, Scenario};
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric divergence: {0}")]
    Divergence(String),
}

impl ExperimentError {
    /// Process exit code: 1 usage, 2 data, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Usage(_) => 1,
            ExperimentError::Data(_) => 2,
            ExperimentError::Divergence(_) => 3,
        }
    }
}

impl From<DatasetError> for ExperimentError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Control { source: ControlError::Divergence { .. }, .. } => ExperimentError::Divergence(e.to_string()),
            other => ExperimentError::Data(other.to_string()),
        }
    }
}

impl From<CheckpointError> for ExperimentError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Neural(n) => n.into(),
            other => ExperimentError::Data(other.to_string()),
        }
    }
}

impl From<NeuralError> for ExperimentError {
    fn from(e: NeuralError) -> Self {
        match &e {
            NeuralError::Domain(m) if m.contains("diverged") => ExperimentError::Divergence(e.to_string()),
            _ => ExperimentError::Data(e.to_string()),
        }
    }
}

impl From<ControlError> for ExperimentError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Divergence { .. } => ExperimentError::Divergence(e.to_string()),
            ControlError::MissingEstimator => ExperimentError::Usage(e.to_string()),
            ControlError::Config(_) => ExperimentError::Data(e.to_string()),
        }
    }
}

impl From<crate::dsp::DspError> for ExperimentError {
    fn from(e: crate::dsp::DspError) -> Self {
        ExperimentError::Data(e.to_string())
    }
}

impl From<io::Error> for ExperimentError {
    fn from(e: io::Error) -> Self {
        ExperimentError::Data(e.to_string())
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

/// Refuses to touch an existing file unless `force` is set.
pub fn check_overwrite(path: &Path, force: bool) -> Result<(), ExperimentError> {
    if path.exists() && !force {
        return Err(ExperimentError::Usage(format!("{} exists; pass --force to overwrite", path.display())));
    }
    Ok(())
}

pub fn dataset_path(dir: &Path, scenario: Scenario) -> PathBuf {
    dir.join(format!("{}.jsonl", scenario.to_string().to_ascii_lowercase()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub train_on: Scenario,
    pub test_on: Vec<Scenario>,
    pub lpf_cutoff_hz: f64,
    /// Trim levels for the sweep; 0 is the untrimmed spectrogram.
    pub trims: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            epochs: 1000,
            learning_rate: 1e-3,
            train_on: Scenario::Data1,
            test_on: Scenario::ALL.to_vec(),
            lpf_cutoff_hz: 5.0,
            trims: vec![0, 1, 2, 3, 4, 5],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Data(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| ExperimentError::Data(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::Usage("at least one seed is required".into()));
        }
        if self.test_on.is_empty() {
            return Err(ExperimentError::Usage("no test scenarios".into()));
        }
        if self.train_on != Scenario::Data1 {
            return Err(ExperimentError::Usage("models are always trained on Data1".into()));
        }
        if self.trims.iter().any(|&t| t > 49) {
            return Err(ExperimentError::Usage("trim levels must be below 50".into()));
        }
        Ok(())
    }

    /// LPF, FNN and CNN on raw and on MS(LC).
    pub fn table_iv_columns(&self) -> Vec<Column> {
        vec![
            Column::Lpf { cutoff_hz: self.lpf_cutoff_hz },
            Column::Model { model: ModelKind::Fnn, feature: FeatureKind::Raw },
            Column::Model { model: ModelKind::Cnn, feature: FeatureKind::Raw },
            Column::Model { model: ModelKind::Fnn, feature: FeatureKind::MS_LC },
            Column::Model { model: ModelKind::Cnn, feature: FeatureKind::MS_LC },
        ]
    }

    pub fn feature_columns(&self) -> Vec<Column> {
        [FeatureKind::Raw, FeatureKind::Stft, FeatureKind::Mfcc, FeatureKind::MS_ALL, FeatureKind::MS_LC]
            .into_iter()
            .map(|feature| Column::Model { model: ModelKind::Cnn, feature })
            .collect()
    }

    pub fn trim_columns(&self) -> Vec<Column> {
        self.trims
            .iter()
            .map(|&trim_low| Column::Model { model: ModelKind::Cnn, feature: FeatureKind::Ms { trim_low } })
            .collect()
    }
}

/// Median-over-seeds RMSE, one row per test scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub title: String,
    pub rows: Vec<Scenario>,
    pub columns: Vec<String>,
    /// `median[row][col]`, N.
    pub median: Vec<Vec<f64>>,
    /// `per_seed[row][col][seed]`, N.
    pub per_seed: Vec<Vec<Vec<f64>>>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub build_id: String,
}

pub fn build_id() -> String {
    format!("{}-{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

impl ResultTable {
    pub fn get(&self, row: Scenario, column: &str) -> Option<f64> {
        let r = self.rows.iter().position(|s| *s == row)?;
        let c = self.columns.iter().position(|s| s == column)?;
        Some(self.median[r][c])
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("scenario,{}\n", self.columns.join(","));
        for (r, s) in self.rows.iter().enumerate() {
            let cells: Vec<String> = self.median[r].iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&format!("{s},{}\n", cells.join(",")));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables serialise")
    }

    pub fn save(&self, dir: &Path, stem: &str) -> io::Result<()> {
        write_atomic(&dir.join(format!("{stem}.csv")), self.to_csv().as_bytes())?;
        write_atomic(&dir.join(format!("{stem}.json")), self.to_json().as_bytes())
    }

    /// Plain-text rendering for terminals.
    pub fn render(&self) -> String {
        let w = self.columns.iter().map(String::len).max().unwrap_or(8).max(9);
        let mut out = format!("{}\n{:<8}", self.title, "");
        for c in &self.columns {
            out.push_str(&format!(" {c:>w$}"));
        }
        out.push('\n');
        for (r, s) in self.rows.iter().enumerate() {
            out.push_str(&format!("{:<8}", s.to_string()));
            for v in &self.median[r] {
                out.push_str(&format!(" {v:>w$.4}"));
            }
            out.push('\n');
        }
        out
    }
}
