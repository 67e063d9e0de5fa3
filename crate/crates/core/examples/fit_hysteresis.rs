//! Grid search for play-operator weights.
//!
//! Widths are fixed; weights live on a simplex with step 0.005 and the score is
//! the squared distance of the residual mean and variance to 4.31 N and
//! 1.54 N^2 over 200 excursions between 70 and 130 N.
//!
//! ```bash
//! cargo run --release --example fit_hysteresis
//! ```

use melforce::plant::{excursion_peaks, play, residual_statistics, HysteresisOperator, CALIBRATED_WEIGHTS, CALIBRATED_WIDTHS};

const TARGET_MEAN: f64 = 4.31;
const TARGET_VAR: f64 = 1.54;

fn main() {
    let peaks = excursion_peaks(200, 7);
    // each play element's residual after 0 -> p -> 0 does not depend on the weights
    let unit: Vec<[f64; 4]> = peaks
        .iter()
        .map(|&p| CALIBRATED_WIDTHS.map(|r| play(r, play(r, 0.0, p), 0.0)))
        .collect();
    let steps = 200;
    let mut best = (f64::INFINITY, [0.0; 4]);
    for a in 0..=steps {
        for b in 0..=steps - a {
            for c in 0..=steps - a - b {
                let d = steps - a - b - c;
                let w = [a, b, c, d].map(|x| x as f64 / steps as f64);
                let r: Vec<f64> = unit.iter().map(|u| u.iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
                let m = r.iter().sum::<f64>() / r.len() as f64;
                let v = r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / r.len() as f64;
                let score = (m - TARGET_MEAN).powi(2) + (v - TARGET_VAR).powi(2);
                if score < best.0 {
                    best = (score, w);
                }
            }
        }
    }
    println!("widths  {CALIBRATED_WIDTHS:?}");
    println!("best    {:?} (score {:.2e})", best.1, best.0);
    println!("shipped {CALIBRATED_WEIGHTS:?}");

    let op = HysteresisOperator::default();
    for seed in 0..5 {
        let nine = excursion_peaks(9, seed);
        let (m, v) = residual_statistics(&op, &nine);
        println!("9 excursions, seed {seed}: mean {m:.3} N, variance {v:.3} N^2");
    }
}
