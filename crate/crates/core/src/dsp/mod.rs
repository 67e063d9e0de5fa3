//! Deterministic frequency-analysis primitives for 1 kHz force signals.

mod lpf;
mod mel;
mod mfcc;
mod stft;
mod window;

pub use lpf::lpf_first_order;
pub use mel::{mel_scale, mel_scale_inverse, mel_spectrogram, log_mel_full, MelFilterbank, MelSpectrogram};
pub use mfcc::{dct2_orthonormal, mfcc};
pub use stft::{log_stft, stft_power};
pub use window::hann_window;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Samples per estimator window (512 ms at 1 kHz).
pub const WINDOW_LEN: usize = 512;
/// Sensor sample period in seconds.
pub const SAMPLE_PERIOD: f64 = 0.001;
/// Floor added to powers before taking the log.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, DspError>;

/// Fixed-length window of force samples, newest last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceWindow {
    samples: Vec<f64>,
    sample_period: f64,
    t_end: f64,
}

impl ForceWindow {
    pub fn new(samples: Vec<f64>, sample_period: f64, t_end: f64) -> Result<Self> {
        if samples.len() != WINDOW_LEN {
            return Err(DspError::Shape(format!(
                "force window needs {WINDOW_LEN} samples, got {}",
                samples.len()
            )));
        }
        if !(sample_period > 0.0) {
            return Err(DspError::Domain(format!("sample period must be > 0, got {sample_period}")));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(DspError::Domain("force window contains non-finite samples".into()));
        }
        Ok(Self { samples, sample_period, t_end })
    }

    /// Window at the nominal 1 kHz rate.
    pub fn from_samples(samples: Vec<f64>, t_end: f64) -> Result<Self> {
        Self::new(samples, SAMPLE_PERIOD, t_end)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sample_period
    }
}

/// Taper applied to each STFT frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    /// Periodic Hann (DFT-even).
    HannPeriodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    pub frame_len: usize,
    pub hop_len: usize,
    pub window: WindowKind,
    pub n_mels: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub trim_low: usize,
    pub trim_high: usize,
}

impl Default for SpectrogramConfig {
    /// 256-sample frames, 16-sample hop, 64 mel channels over 0..500 Hz,
    /// bottom 5 and top 14 channels dropped: a 17 x 45 feature.
    fn default() -> Self {
        Self {
            frame_len: 256,
            hop_len: 16,
            window: WindowKind::HannPeriodic,
            n_mels: 64,
            f_min_hz: 0.0,
            f_max_hz: 500.0,
            trim_low: 5,
            trim_high: 14,
        }
    }
}

impl SpectrogramConfig {
    /// Same config with a different number of low channels removed.
    pub fn with_trim_low(&self, trim_low: usize) -> Self {
        Self { trim_low, ..self.clone() }
    }

    pub fn n_bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    pub fn n_kept(&self) -> usize {
        self.n_mels.saturating_sub(self.trim_low + self.trim_high)
    }

    /// Frames produced for a window of `len` samples.
    pub fn n_frames(&self, len: usize) -> Result<usize> {
        if self.hop_len == 0 || self.frame_len < 2 {
            return Err(DspError::Domain("frame_len must be >= 2 and hop_len >= 1".into()));
        }
        if len < self.frame_len {
            return Err(DspError::Shape(format!(
                "window of {len} samples is shorter than frame_len {}",
                self.frame_len
            )));
        }
        Ok((len - self.frame_len) / self.hop_len + 1)
    }

    pub fn validate(&self) -> Result<()> {
        self.n_frames(WINDOW_LEN)?;
        if self.n_mels < 1 || self.trim_low + self.trim_high >= self.n_mels {
            return Err(DspError::Domain(format!(
                "trimming {}+{} channels leaves nothing of {}",
                self.trim_low, self.trim_high, self.n_mels
            )));
        }
        if !(self.f_min_hz >= 0.0 && self.f_max_hz > self.f_min_hz) {
            return Err(DspError::Domain(format!(
                "invalid band {}..{} Hz",
                self.f_min_hz, self.f_max_hz
            )));
        }
        Ok(())
    }
}

/// Dense row-major matrix of reals, rows = time frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Keep columns `start..end` of every row.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Self { rows: self.rows, cols, data }
    }
}
