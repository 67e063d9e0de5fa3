use std::f64::consts::PI;

/// First-order low-pass, `y[k] = a y[k-1] + (1 - a) u[k]` with
/// `a = exp(-2 pi fc dt)` and the state primed with the first input.
///
/// An infinite cutoff passes the signal through unchanged.
pub fn lpf_first_order(signal: &[f64], cutoff_hz: f64, dt: f64) -> Vec<f64> {
    assert!(cutoff_hz > 0.0, "cutoff must be positive");
    assert!(dt > 0.0, "dt must be positive");
    let Some(&first) = signal.first() else {
        return Vec::new();
    };
    let a = (-2.0 * PI * cutoff_hz * dt).exp();
    let mut y = first;
    signal
        .iter()
        .map(|&u| {
            y = a * y + (1.0 - a) * u;
            y
        })
        .collect()
}
