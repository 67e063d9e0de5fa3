//! Slow reference implementations used as test oracles.

use std::f64::consts::PI;

pub const FRAME: usize = 256;
pub const HOP: usize = 16;
pub const N_MELS: usize = 64;
pub const TRIM_LOW: usize = 5;
pub const TRIM_HIGH: usize = 14;
pub const FS: f64 = 1000.0;

pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Full `N`-point DFT power by direct summation.
pub fn naive_dft_power(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                // reduce the phase index first so large k*t keeps full precision
                let ph = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += v * ph.cos();
                im += v * ph.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// Hann-tapered frames of a window.
pub fn frames(window: &[f64]) -> Vec<Vec<f64>> {
    let w = hann_periodic(FRAME);
    (0..=(window.len() - FRAME) / HOP)
        .map(|f| window[f * HOP..f * HOP + FRAME].iter().zip(&w).map(|(x, w)| x * w).collect())
        .collect()
}

/// One-sided power per frame, `FRAME / 2 + 1` bins.
pub fn stft_power(window: &[f64]) -> Vec<Vec<f64>> {
    frames(window).iter().map(|fr| naive_dft_power(fr)[..FRAME / 2 + 1].to_vec()).collect()
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangle edges in Hz, `N_MELS + 2` points.
pub fn mel_edges() -> Vec<f64> {
    let top = hz_to_mel(FS / 2.0);
    (0..N_MELS + 2).map(|i| mel_to_hz(top * i as f64 / (N_MELS + 1) as f64)).collect()
}

/// Kept log-mel rows, `[frames][N_MELS - TRIM_LOW - TRIM_HIGH]`.
pub fn log_mel(window: &[f64]) -> Vec<Vec<f64>> {
    let e = mel_edges();
    stft_power(window)
        .iter()
        .map(|p| {
            (TRIM_LOW..N_MELS - TRIM_HIGH)
                .map(|j| {
                    let energy: f64 = p
                        .iter()
                        .enumerate()
                        .map(|(b, &pw)| {
                            let f = b as f64 * FS / FRAME as f64;
                            let w = if f <= e[j] || f >= e[j + 2] {
                                0.0
                            } else if f <= e[j + 1] {
                                (f - e[j]) / (e[j + 1] - e[j])
                            } else {
                                (e[j + 2] - f) / (e[j + 2] - e[j + 1])
                            };
                            w * pw
                        })
                        .sum();
                    (energy + 1e-10).ln()
                })
                .collect()
        })
        .collect()
}
