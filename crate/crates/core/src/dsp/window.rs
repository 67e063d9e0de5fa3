use super::{DspError, Result};
use std::f64::consts::PI;

/// Periodic Hann taper: `w[k] = 0.5 (1 - cos(2 pi k / n))`.
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(DspError::Domain(format!("hann window length must be >= 2, got {n}")));
    }
    Ok((0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / n as f64).cos()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_period_values() {
        let w = hann_window(4).unwrap();
        let expected = [0.0, 0.5, 1.0, 0.5];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let w2 = hann_window(2).unwrap();
        assert!(w2[0].abs() < 1e-15 && (w2[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eighth_point() {
        let w = hann_window(8).unwrap();
        assert!((w[1] - 0.146_446_609_406_726_24).abs() < 1e-12);
        assert_eq!(w[0], 0.0);
        assert!(w.iter().all(|&v| v <= 1.0));
    }

    #[test]
    fn too_short() {
        assert!(matches!(hann_window(1), Err(DspError::Domain(_))));
        assert!(hann_window(0).is_err());
    }
}
