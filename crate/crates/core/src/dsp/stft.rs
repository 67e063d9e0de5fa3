use super::{hann_window, ForceWindow, Matrix, Result, SpectrogramConfig, LOG_FLOOR};
use rustfft::{num_complex::Complex, FftPlanner};
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// One-sided STFT power `|DFT(hann * frame)|^2`, shape `[n_frames x frame_len/2+1]`.
pub fn stft_power(window: &ForceWindow, cfg: &SpectrogramConfig) -> Result<Matrix> {
    stft_power_samples(window.samples(), cfg)
}

pub(crate) fn stft_power_samples(samples: &[f64], cfg: &SpectrogramConfig) -> Result<Matrix> {
    let n_frames = cfg.n_frames(samples.len())?;
    let n = cfg.frame_len;
    let n_bins = cfg.n_bins();
    let taper = hann_window(n)?;
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));

    let mut out = Matrix::zeros(n_frames, n_bins);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for f in 0..n_frames {
        let frame = &samples[f * cfg.hop_len..f * cfg.hop_len + n];
        for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&taper) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        // real input: bins above n/2 mirror the ones below
        for (dst, c) in out.row_mut(f).iter_mut().zip(&buf[..n_bins]) {
            *dst = c.norm_sqr();
        }
    }
    Ok(out)
}

/// `ln(power + floor)` of the one-sided STFT, shape `[n_frames x n_bins]`.
pub fn log_stft(window: &ForceWindow, cfg: &SpectrogramConfig) -> Result<Matrix> {
    let mut p = stft_power(window, cfg)?;
    p.data.iter_mut().for_each(|v| *v = (*v + LOG_FLOOR).ln());
    Ok(p)
}
