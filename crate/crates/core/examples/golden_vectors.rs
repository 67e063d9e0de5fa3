//! Regenerates `tests/data/golden_mel.json` from the direct-summation oracle.
//!
//! ```bash
//! cargo run --release --example golden_vectors
//! ```

#[path = "../tests/common/oracle.rs"]
mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::f64::consts::TAU;

fn main() -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases = Vec::new();
    for (name, tone_hz) in [("tone_200hz", 200.0), ("tone_137hz", 137.0), ("tone_330hz", 330.0)] {
        let offset: f64 = rng.random_range(-3.0..3.0);
        let samples: Vec<f64> = (0..512)
            .map(|t| offset + 0.8 * (TAU * tone_hz * t as f64 / 1000.0).sin() + 0.05 * rng.random_range(-1.0..1.0))
            .collect();
        cases.push(json!({ "name": name, "samples": samples, "log_mel": oracle::log_mel(&samples) }));
    }
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/golden_mel.json");
    std::fs::write(path, serde_json::to_string_pretty(&json!({ "tolerance": 1e-6, "cases": cases }))?)?;
    println!("wrote {path}");
    Ok(())
}
