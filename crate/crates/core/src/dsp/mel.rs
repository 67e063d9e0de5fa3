use super::{stft::stft_power_samples, DspError, ForceWindow, Matrix, Result, SpectrogramConfig, LOG_FLOOR};
use serde::{Deserialize, Serialize};

/// `2595 log10(1 + f / 700)`.
pub fn mel_scale(f_hz: f64) -> Result<f64> {
    if !(f_hz >= 0.0) {
        return Err(DspError::Domain(format!("frequency must be >= 0, got {f_hz}")));
    }
    Ok(2595.0 * (f_hz / 700.0).ln_1p() / std::f64::consts::LN_10)
}

pub fn mel_scale_inverse(mel: f64) -> Result<f64> {
    if !(mel >= 0.0) {
        return Err(DspError::Domain(format!("mel value must be >= 0, got {mel}")));
    }
    Ok(700.0 * (mel * std::f64::consts::LN_10 / 2595.0).exp_m1())
}

/// Triangular filters with peaks evenly spaced in mel between `f_min` and
/// `f_max`. Peak height is 1; neighbouring triangles sum to 1 between the
/// first and last peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelFilterbank {
    /// `[n_mels x n_bins]`.
    pub weights: Matrix,
    pub bin_freqs_hz: Vec<f64>,
    /// `n_mels + 2` edge frequencies; filter `j` spans `edges[j]..edges[j + 2]`.
    pub edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, frame_len: usize, sample_rate: f64, f_min: f64, f_max: f64) -> Result<Self> {
        if n_mels == 0 || frame_len < 2 {
            return Err(DspError::Domain("filterbank needs n_mels >= 1 and frame_len >= 2".into()));
        }
        let n_bins = frame_len / 2 + 1;
        let bin_freqs_hz: Vec<f64> = (0..n_bins).map(|b| b as f64 * sample_rate / frame_len as f64).collect();
        let m_lo = mel_scale(f_min)?;
        let m_hi = mel_scale(f_max)?;
        let step = (m_hi - m_lo) / (n_mels + 1) as f64;
        let edges_hz = (0..n_mels + 2)
            .map(|i| mel_scale_inverse(m_lo + step * i as f64))
            .collect::<Result<Vec<_>>>()?;

        let mut weights = Matrix::zeros(n_mels, n_bins);
        for j in 0..n_mels {
            let (lo, mid, hi) = (edges_hz[j], edges_hz[j + 1], edges_hz[j + 2]);
            for (b, &f) in bin_freqs_hz.iter().enumerate() {
                let w = if f > lo && f <= mid {
                    (f - lo) / (mid - lo)
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
                weights.data[j * n_bins + b] = w;
            }
        }
        Ok(Self { weights, bin_freqs_hz, edges_hz })
    }

    pub fn for_config(cfg: &SpectrogramConfig, sample_rate: f64) -> Result<Self> {
        Self::new(cfg.n_mels, cfg.frame_len, sample_rate, cfg.f_min_hz, cfg.f_max_hz)
    }

    pub fn n_mels(&self) -> usize {
        self.weights.rows
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.edges_hz[1..self.edges_hz.len() - 1]
    }

    /// Mel energies for one power spectrum row.
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        let n_bins = self.weights.cols;
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.weights.data[j * n_bins..(j + 1) * n_bins];
            *o = row.iter().zip(power).map(|(w, p)| w * p).sum();
        }
    }
}

/// Log-mel matrix with the low/high channel trim applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelSpectrogram {
    /// `[n_frames x n_kept]`, natural log of mel power plus floor.
    pub values: Matrix,
    pub config: SpectrogramConfig,
    pub kept_channel_centers_hz: Vec<f64>,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.values.rows
    }

    pub fn n_channels(&self) -> usize {
        self.values.cols
    }
}

/// Untrimmed `[n_frames x n_mels]` log-mel energies.
pub fn log_mel_full(window: &ForceWindow, cfg: &SpectrogramConfig, bank: &MelFilterbank) -> Result<Matrix> {
    cfg.validate()?;
    if bank.n_mels() != cfg.n_mels || bank.weights.cols != cfg.n_bins() {
        return Err(DspError::Shape(format!(
            "filterbank is {}x{}, config wants {}x{}",
            bank.n_mels(),
            bank.weights.cols,
            cfg.n_mels,
            cfg.n_bins()
        )));
    }
    let power = stft_power_samples(window.samples(), cfg)?;
    let mut out = Matrix::zeros(power.rows, cfg.n_mels);
    for f in 0..power.rows {
        let row = out.row_mut(f);
        bank.apply(power.row(f), row);
        row.iter_mut().for_each(|v| *v = (*v + LOG_FLOOR).ln());
    }
    Ok(out)
}

/// Log-mel spectrogram restricted to channels `trim_low..n_mels - trim_high`.
///
/// Builds the filterbank on every call; hot paths should keep a
/// [`MelFilterbank`] and call [`log_mel_full`] directly.
pub fn mel_spectrogram(window: &ForceWindow, cfg: &SpectrogramConfig) -> Result<MelSpectrogram> {
    cfg.validate()?;
    let bank = MelFilterbank::for_config(cfg, window.sample_rate())?;
    mel_spectrogram_with(window, cfg, &bank)
}

pub(crate) fn mel_spectrogram_with(
    window: &ForceWindow,
    cfg: &SpectrogramConfig,
    bank: &MelFilterbank,
) -> Result<MelSpectrogram> {
    let full = log_mel_full(window, cfg, bank)?;
    let end = cfg.n_mels - cfg.trim_high;
    Ok(MelSpectrogram {
        values: full.columns(cfg.trim_low, end),
        config: cfg.clone(),
        kept_channel_centers_hz: bank.centers_hz()[cfg.trim_low..end].to_vec(),
    })
}
