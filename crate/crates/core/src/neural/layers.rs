use super::{NeuralError, Parameters, Result, Tensor2};
use rand::Rng;

fn he_uniform(rng: &mut impl Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

/// Valid (unpadded) stride-1 cross-correlation along time.
///
/// Kernel layout is `[out][in][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub c_out: usize,
    pub c_in: usize,
    pub k: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn zeros(c_out: usize, c_in: usize, k: usize) -> Self {
        Self { c_out, c_in, k, weight: vec![0.0; c_out * c_in * k], bias: vec![0.0; c_out] }
    }

    pub fn he(c_out: usize, c_in: usize, k: usize, rng: &mut impl Rng) -> Self {
        Self { weight: he_uniform(rng, c_out * c_in * k, c_in * k), ..Self::zeros(c_out, c_in, k) }
    }

    #[inline]
    fn w(&self, o: usize, i: usize, j: usize) -> f64 {
        self.weight[(o * self.c_in + i) * self.k + j]
    }

    pub fn output_len(&self, t: usize) -> usize {
        t + 1 - self.k
    }

    pub fn forward(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols != self.c_in {
            return Err(NeuralError::Shape(format!(
                "conv1d expects {} input channels, got {}",
                self.c_in, x.cols
            )));
        }
        if x.rows < self.k {
            return Err(NeuralError::Shape(format!(
                "conv1d kernel {} longer than input length {}",
                self.k, x.rows
            )));
        }
        let t_out = self.output_len(x.rows);
        let mut y = Tensor2::zeros(t_out, self.c_out);
        for t in 0..t_out {
            for o in 0..self.c_out {
                let mut acc = self.bias[o];
                for j in 0..self.k {
                    let xr = x.row(t + j);
                    let base = o * self.c_in * self.k + j;
                    for (i, &xv) in xr.iter().enumerate() {
                        acc += self.weight[base + i * self.k] * xv;
                    }
                }
                y.data[t * self.c_out + o] = acc;
            }
        }
        Ok(y)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Tensor2, grad_out: &Tensor2, grad: &mut Conv1d) -> Tensor2 {
        let t_out = grad_out.rows;
        let mut gx = Tensor2::zeros(x.rows, x.cols);
        for t in 0..t_out {
            for o in 0..self.c_out {
                let g = grad_out.data[t * self.c_out + o];
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                for j in 0..self.k {
                    let row = (t + j) * self.c_in;
                    for i in 0..self.c_in {
                        let widx = (o * self.c_in + i) * self.k + j;
                        grad.weight[widx] += g * x.data[row + i];
                        gx.data[row + i] += g * self.w(o, i, j);
                    }
                }
            }
        }
        gx
    }
}

impl Parameters for Conv1d {
    fn slices(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }
    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Fully connected layer, weights `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_out: usize,
    pub n_in: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_out: usize, n_in: usize) -> Self {
        Self { n_out, n_in, weight: vec![0.0; n_out * n_in], bias: vec![0.0; n_out] }
    }

    pub fn he(n_out: usize, n_in: usize, rng: &mut impl Rng) -> Self {
        Self { weight: he_uniform(rng, n_out * n_in, n_in), ..Self::zeros(n_out, n_in) }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_in {
            return Err(NeuralError::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.n_in,
                x.len()
            )));
        }
        Ok(self
            .weight
            .chunks_exact(self.n_in)
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect())
    }

    pub fn backward(&self, x: &[f64], grad_out: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut gx = vec![0.0; self.n_in];
        for (o, &g) in grad_out.iter().enumerate() {
            grad.bias[o] += g;
            let w = &self.weight[o * self.n_in..(o + 1) * self.n_in];
            let gw = &mut grad.weight[o * self.n_in..(o + 1) * self.n_in];
            for i in 0..self.n_in {
                gw[i] += g * x[i];
                gx[i] += g * w[i];
            }
        }
        gx
    }
}

impl Parameters for Dense {
    fn slices(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }
    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Non-overlapping mean pooling along time; a trailing partial window is dropped.
pub fn avg_pool1d(x: &Tensor2, width: usize, stride: usize) -> Tensor2 {
    let t_out = if x.rows >= width { (x.rows - width) / stride + 1 } else { 0 };
    let mut y = Tensor2::zeros(t_out, x.cols);
    let inv = 1.0 / width as f64;
    for t in 0..t_out {
        for j in 0..width {
            let src = x.row(t * stride + j);
            y.row_mut(t).iter_mut().zip(src).for_each(|(d, s)| *d += s * inv);
        }
    }
    y
}

pub fn avg_pool1d_backward(input_rows: usize, grad_out: &Tensor2, width: usize, stride: usize) -> Tensor2 {
    let mut gx = Tensor2::zeros(input_rows, grad_out.cols);
    let inv = 1.0 / width as f64;
    for t in 0..grad_out.rows {
        for j in 0..width {
            let g = grad_out.row(t);
            gx.row_mut(t * stride + j).iter_mut().zip(g).for_each(|(d, g)| *d += g * inv);
        }
    }
    gx
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Gradient through ReLU given the pre-activation.
pub fn relu_backward(pre: &[f64], grad_out: &[f64]) -> Vec<f64> {
    pre.iter().zip(grad_out).map(|(&z, &g)| if z > 0.0 { g } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2 {
        Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn identity_kernel() {
        let mut c = Conv1d::zeros(1, 1, 1);
        c.weight[0] = 1.0;
        let x = Tensor2::from_vec(5, 1, vec![1.0, -2.0, 3.0, 0.5, 7.0]);
        assert_eq!(c.forward(&x).unwrap(), x);
    }

    #[test]
    fn conv_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = Conv1d::he(7, 5, 3, &mut rng);
        let mut c = c;
        c.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        let x = random_tensor(&mut rng, 12, 5);
        let y = c.forward(&x).unwrap();
        assert_eq!((y.rows, y.cols), (10, 7));
        for t in 0..10 {
            for o in 0..7 {
                let mut s = c.bias[o];
                for i in 0..5 {
                    for j in 0..3 {
                        s += c.weight[o * 15 + i * 3 + j] * x.get(t + j, i);
                    }
                }
                assert!((s - y.get(t, o)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_shape_errors() {
        let c = Conv1d::zeros(2, 3, 3);
        assert!(c.forward(&Tensor2::zeros(10, 4)).is_err());
        assert!(c.forward(&Tensor2::zeros(2, 3)).is_err());
        let d = Dense::zeros(2, 3);
        assert!(d.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn pool_floor_semantics() {
        assert_eq!(avg_pool1d(&Tensor2::zeros(15, 20), 2, 2).rows, 7);
        assert_eq!(avg_pool1d(&Tensor2::zeros(6, 10), 2, 2).rows, 3);
        let y = avg_pool1d(&Tensor2::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]), 2, 2);
        assert_eq!(y.data, vec![1.5, 3.5]);
        let c = avg_pool1d(&Tensor2::from_vec(5, 2, vec![2.5; 10]), 2, 2);
        assert!(c.data.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn pool_backward_spreads_evenly_and_skips_remainder() {
        let g = Tensor2::from_vec(2, 1, vec![1.0, 4.0]);
        let gx = avg_pool1d_backward(5, &g, 2, 2);
        assert_eq!(gx.data, vec![0.5, 0.5, 2.0, 2.0, 0.0]);
    }
}
