use super::ResultTable;
use crate::control::RunLog;
use crate::dsp::{mel_spectrogram, DspError, ForceWindow, SpectrogramConfig};
use crate::plant::HysteresisOperator;
use std::fmt::Write;

/// Input/output trace of a 0 -> peak -> 0 excursion.
pub fn hysteresis_loop(op: &HysteresisOperator, peak: f64, steps: usize) -> String {
    let mut h = op.clone();
    h.reset();
    let mut out = String::from("input_n,output_n\n");
    let steps = steps.max(1);
    for i in 0..=2 * steps {
        let x = if i <= steps { peak * i as f64 / steps as f64 } else { peak * (2 * steps - i) as f64 / steps as f64 };
        let y = h.apply(x);
        writeln!(out, "{x},{y}").unwrap();
    }
    out
}

/// Long-format dump of a trimmed log-mel spectrogram.
pub fn mel_heatmap(window: &ForceWindow, cfg: &SpectrogramConfig) -> Result<String, DspError> {
    let ms = mel_spectrogram(window, cfg)?;
    let mut out = String::from("frame,channel,center_hz,log_power\n");
    for f in 0..ms.values.rows {
        for (c, hz) in ms.kept_channel_centers_hz.iter().enumerate() {
            writeln!(out, "{f},{c},{hz},{}", ms.values.get(f, c)).unwrap();
        }
    }
    Ok(out)
}

pub fn rmse_bars(table: &ResultTable) -> String {
    let mut out = String::from("scenario,column,rmse_n\n");
    for (r, s) in table.rows.iter().enumerate() {
        for (c, name) in table.columns.iter().enumerate() {
            writeln!(out, "{s},{name},{}", table.median[r][c]).unwrap();
        }
    }
    out
}

/// Force traces of a closed-loop run, decimated by `every`.
pub fn run_log_traces(log: &RunLog, every: usize) -> String {
    let mut out = String::from("time_s,true_force_n,eef_force_n,feedback_force_n,worktable_force_n,cmd_force_n\n");
    for s in log.samples.iter().step_by(every.max(1)) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.time, s.true_force, s.eef_force, s.feedback_force, s.worktable_force, s.cmd_force
        )
        .unwrap();
    }
    out
}
