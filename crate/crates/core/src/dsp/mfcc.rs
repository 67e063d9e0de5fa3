use super::{DspError, Matrix, Result};
use std::f64::consts::PI;

/// Orthonormal DCT-II basis, `[n_coeffs x n]`.
fn dct_basis(n: usize, n_coeffs: usize) -> Vec<f64> {
    let mut basis = Vec::with_capacity(n * n_coeffs);
    for k in 0..n_coeffs {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            basis.push(scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos());
        }
    }
    basis
}

/// Orthonormal DCT-II of one row, first `n_coeffs` retained.
pub fn dct2_orthonormal(row: &[f64], n_coeffs: usize) -> Result<Vec<f64>> {
    if n_coeffs == 0 || n_coeffs > row.len() {
        return Err(DspError::Domain(format!(
            "n_coeffs must be in 1..={}, got {n_coeffs}",
            row.len()
        )));
    }
    let n = row.len();
    let basis = dct_basis(n, n_coeffs);
    Ok(basis.chunks(n).map(|b| b.iter().zip(row).map(|(c, x)| c * x).sum()).collect())
}

/// Cepstral coefficients: DCT-II along the channel axis of a full log-mel matrix.
pub fn mfcc(log_mel: &Matrix, n_coeffs: usize) -> Result<Matrix> {
    let n = log_mel.cols;
    if n_coeffs == 0 || n_coeffs > n {
        return Err(DspError::Domain(format!("n_coeffs must be in 1..={n}, got {n_coeffs}")));
    }
    let basis = dct_basis(n, n_coeffs);
    let mut out = Matrix::zeros(log_mel.rows, n_coeffs);
    for f in 0..log_mel.rows {
        let src = log_mel.row(f);
        for (o, b) in out.row_mut(f).iter_mut().zip(basis.chunks(n)) {
            *o = b.iter().zip(src).map(|(c, x)| c * x).sum();
        }
    }
    Ok(out)
}
