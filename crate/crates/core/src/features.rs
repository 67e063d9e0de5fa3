//! Window -> network-input conversion for every compared feature kind.

use crate::dsp::{self, DspError, ForceWindow, Matrix, MelFilterbank, SpectrogramConfig};
use crate::neural::Tensor2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Raw-force inputs are divided by this many newton.
pub const RAW_SCALE_N: f64 = 10.0;
/// MFCC coefficients kept so the cepstral feature matches the 45-channel MS width.
pub const MFCC_COEFFS: usize = 45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum FeatureKind {
    /// Window decimated to 2 ms, `[256 x 1]`.
    Raw,
    /// Log power of the one-sided STFT, `[17 x 129]`.
    Stft,
    /// DCT of the 64 log-mel channels, first 45 coefficients.
    Mfcc,
    /// Log-mel with the top 14 and the bottom `trim_low` channels removed.
    Ms { trim_low: usize },
}

impl FeatureKind {
    pub const MS_ALL: FeatureKind = FeatureKind::Ms { trim_low: 0 };
    pub const MS_LC: FeatureKind = FeatureKind::Ms { trim_low: 5 };

    /// Input tensor shape for the standard spectrogram config.
    pub fn input_shape(&self) -> (usize, usize) {
        let cfg = SpectrogramConfig::default();
        let frames = (dsp::WINDOW_LEN - cfg.frame_len) / cfg.hop_len + 1;
        match *self {
            FeatureKind::Raw => (dsp::WINDOW_LEN / 2, 1),
            FeatureKind::Stft => (frames, cfg.n_bins()),
            FeatureKind::Mfcc => (frames, MFCC_COEFFS),
            FeatureKind::Ms { trim_low } => (frames, cfg.n_mels - cfg.trim_high - trim_low),
        }
    }

    pub fn is_spectral(&self) -> bool {
        !matches!(self, FeatureKind::Raw)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Raw => f.write_str("raw"),
            FeatureKind::Stft => f.write_str("stft"),
            FeatureKind::Mfcc => f.write_str("mfcc"),
            FeatureKind::Ms { trim_low: 0 } => f.write_str("ms_all"),
            FeatureKind::Ms { trim_low: 5 } => f.write_str("ms_lc"),
            FeatureKind::Ms { trim_low } => write!(f, "ms_trim{trim_low}"),
        }
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(FeatureKind::Raw),
            "stft" => Ok(FeatureKind::Stft),
            "mfcc" => Ok(FeatureKind::Mfcc),
            "ms_all" | "ms" => Ok(FeatureKind::MS_ALL),
            "ms_lc" => Ok(FeatureKind::MS_LC),
            other => other
                .strip_prefix("ms_trim")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n < 50)
                .map(|trim_low| FeatureKind::Ms { trim_low })
                .ok_or_else(|| format!("unknown feature '{other}' (raw, stft, mfcc, ms_all, ms_lc, ms_trimN)")),
        }
    }
}

impl From<FeatureKind> for String {
    fn from(k: FeatureKind) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for FeatureKind {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

/// Per-channel affine normalisation, `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(channels: usize) -> Self {
        Self { mean: vec![0.0; channels], std: vec![1.0; channels] }
    }

    pub fn raw() -> Self {
        Self { mean: vec![0.0], std: vec![RAW_SCALE_N] }
    }

    /// Mean and standard deviation of each column over all rows of all inputs.
    pub fn fit(inputs: &[Tensor2]) -> Self {
        let cols = inputs.first().map_or(0, |x| x.cols);
        let mut sum = vec![0.0; cols];
        let mut sq = vec![0.0; cols];
        let mut n = 0usize;
        for x in inputs {
            for r in 0..x.rows {
                for (c, &v) in x.row(r).iter().enumerate() {
                    sum[c] += v;
                    sq[c] += v * v;
                }
                n += 1;
            }
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var.sqrt() > 1e-9 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &mut Tensor2) {
        assert_eq!(x.cols, self.mean.len(), "normalisation width");
        for r in 0..x.rows {
            for ((v, m), s) in x.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }
}

/// Stateless feature computation with the filterbank built once.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    kind: FeatureKind,
    config: SpectrogramConfig,
    bank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(kind: FeatureKind) -> Self {
        let config = SpectrogramConfig::default();
        let config = match kind {
            FeatureKind::Ms { trim_low } => config.with_trim_low(trim_low),
            _ => config,
        };
        let bank = MelFilterbank::for_config(&config, 1.0 / dsp::SAMPLE_PERIOD).expect("default filterbank is valid");
        Self { kind, config, bank }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn config(&self) -> &SpectrogramConfig {
        &self.config
    }

    /// Unnormalised feature tensor.
    pub fn extract(&self, window: &ForceWindow) -> Result<Tensor2, DspError> {
        match self.kind {
            FeatureKind::Raw => Ok(decimate_by_two(window)),
            FeatureKind::Stft => dsp::log_stft(window, &self.config),
            FeatureKind::Mfcc => {
                let full = dsp::log_mel_full(window, &self.config, &self.bank)?;
                dsp::mfcc(&full, MFCC_COEFFS)
            }
            FeatureKind::Ms { .. } => {
                let full = dsp::log_mel_full(window, &self.config, &self.bank)?;
                Ok(full.columns(self.config.trim_low, self.config.n_mels - self.config.trim_high))
            }
        }
    }
}

/// Every second sample, keeping the newest: 1 ms -> 2 ms sampling.
pub fn decimate_by_two(window: &ForceWindow) -> Matrix {
    let s: Vec<f64> = window.samples().iter().skip(1).step_by(2).copied().collect();
    Matrix::from_vec(s.len(), 1, s)
}
