//! Central finite-difference checks for every layer and both networks.

use melforce::neural::{
    avg_pool1d, avg_pool1d_backward, relu, relu_backward, Architecture, Conv1d, Dense, Network, Parameters, Tensor2,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;

/// `|a - n| / (|a| + |n|)` over the whole gradient vector.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + STEP;
            let up = f(&probe);
            probe[i] = orig - STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Values kept away from the ReLU kink so the difference quotient is smooth.
fn away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) { v } else { -v }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn params_flat<P: Parameters>(p: &P) -> Vec<f64> {
    p.slices().concat()
}

fn set_params<P: Parameters>(p: &mut P, flat: &[f64]) {
    let mut off = 0;
    for s in p.slices_mut() {
        s.copy_from_slice(&flat[off..off + s.len()]);
        off += s.len();
    }
}

/// Worst relative error over `instances` random conv problems, parameters and input together.
pub fn conv1d(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (c_out, c_in, k) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..4));
        let t = rng.random_range(k..k + 6);
        let layer = Conv1d::he(c_out, c_in, k, &mut rng);
        let x = Tensor2::from_vec(t, c_in, random_vec(&mut rng, t * c_in));
        let g = random_vec(&mut rng, layer.output_len(t) * c_out);

        let mut grad = Conv1d::zeros(c_out, c_in, k);
        let gx = layer.backward(&x, &Tensor2::from_vec(layer.output_len(t), c_out, g.clone()), &mut grad);

        let base = params_flat(&layer);
        let num_p = numeric_grad(&base, |p| {
            let mut l = layer.clone();
            set_params(&mut l, p);
            dot(&l.forward(&x).unwrap().data, &g)
        });
        let num_x = numeric_grad(&x.data, |xd| dot(&layer.forward(&Tensor2::from_vec(t, c_in, xd.to_vec())).unwrap().data, &g));
        worst = worst.max(relative_error(&params_flat(&grad), &num_p)).max(relative_error(&gx.data, &num_x));
    }
    worst
}

pub fn dense(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (n_out, n_in) = (rng.random_range(1..12), rng.random_range(1..12));
        let layer = Dense::he(n_out, n_in, &mut rng);
        let x = random_vec(&mut rng, n_in);
        let g = random_vec(&mut rng, n_out);
        let mut grad = Dense::zeros(n_out, n_in);
        let gx = layer.backward(&x, &g, &mut grad);
        let num_p = numeric_grad(&params_flat(&layer), |p| {
            let mut l = layer.clone();
            set_params(&mut l, p);
            dot(&l.forward(&x).unwrap(), &g)
        });
        let num_x = numeric_grad(&x, |xv| dot(&layer.forward(xv).unwrap(), &g));
        worst = worst.max(relative_error(&params_flat(&grad), &num_p)).max(relative_error(&gx, &num_x));
    }
    worst
}

pub fn avg_pool(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let width = rng.random_range(1..4);
        let (t, c) = (rng.random_range(width..width + 8), rng.random_range(1..5));
        let x = random_vec(&mut rng, t * c);
        let t_out = (t - width) / width + 1;
        let g = random_vec(&mut rng, t_out * c);
        let gx = avg_pool1d_backward(t, &Tensor2::from_vec(t_out, c, g.clone()), width, width);
        let num = numeric_grad(&x, |xv| dot(&avg_pool1d(&Tensor2::from_vec(t, c, xv.to_vec()), width, width).data, &g));
        worst = worst.max(relative_error(&gx.data, &num));
    }
    worst
}

pub fn relu_layer(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(1..30);
        let x = away_from_zero(&mut rng, n);
        let g = random_vec(&mut rng, n);
        let gx = relu_backward(&x, &g);
        let num = numeric_grad(&x, |xv| dot(&relu(xv), &g));
        worst = worst.max(relative_error(&gx, &num));
    }
    worst
}

/// Whole-network squared-error gradient against finite differences on every parameter.
pub fn network(arch: Architecture, instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = match arch {
        Architecture::Tdnn { input_len, in_channels } => (input_len, in_channels),
        Architecture::Fnn { input_width } => (1, input_width),
    };
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let net = Network::init(arch, seed * 1000 + i as u64).unwrap();
        let x = Tensor2::from_vec(rows, cols, random_vec(&mut rng, rows * cols));
        let target = rng.random_range(-2.0..2.0);
        let (_, grad) = net.loss_and_grad(&x, target).unwrap();
        let num = numeric_grad(&params_flat(&net), |p| {
            let mut n = net.clone();
            set_params(&mut n, p);
            let e = n.forward(&x).unwrap() - target;
            e * e
        });
        worst = worst.max(relative_error(&params_flat(&grad), &num));
    }
    worst
}
