//! Loopback helpers shared by the service tests and the acceptance run.

use melforce::checkpoint::ModelKind;
use melforce::features::Normalization;
use melforce::neural::{Architecture, Network};
use melforce::{Estimator, FeatureKind, ForceWindow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Untrained but non-trivial MS(LC) TDNN estimator.
pub fn random_estimator(seed: u64) -> Estimator {
    let norm = Normalization { mean: vec![-5.0; 45], std: vec![4.0; 45] };
    Estimator::new(ModelKind::Cnn, FeatureKind::MS_LC, Network::init(Architecture::MS_LC_TDNN, seed).unwrap(), norm)
}

/// A vibrating force window with a random offset.
pub fn random_window(rng: &mut ChaCha8Rng) -> ForceWindow {
    let f: f64 = rng.random_range(100.0..300.0);
    let a: f64 = rng.random_range(0.1..1.0);
    let c: f64 = rng.random_range(-3.0..5.0);
    let samples = (0..512)
        .map(|t| c + a * (std::f64::consts::TAU * f * t as f64 / 1000.0).sin() + rng.random_range(-0.05..0.05))
        .collect();
    ForceWindow::from_samples(samples, rng.random_range(0.512..100.0)).unwrap()
}

/// Random bytes shaped to hit every decode branch.
pub fn malformed_datagram(rng: &mut ChaCha8Rng, valid: &[u8]) -> Vec<u8> {
    match rng.random_range(0..5) {
        0 => (0..rng.random_range(0..64)).map(|_| rng.random()).collect(),
        1 => valid[..rng.random_range(0..valid.len())].to_vec(),
        2 => {
            let mut v = valid.to_vec();
            v.extend((0..rng.random_range(1..16)).map(|_| rng.random::<u8>()));
            v
        }
        3 => {
            let mut v = valid.to_vec();
            let i = rng.random_range(0..19);
            v[i] ^= rng.random_range(1..=255u8);
            v
        }
        _ => {
            let mut v = valid.to_vec();
            for _ in 0..8 {
                let i = rng.random_range(19..v.len());
                v[i] = 0xff;
            }
            v
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
