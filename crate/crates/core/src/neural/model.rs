use super::layers::{avg_pool1d, avg_pool1d_backward, relu, relu_backward, Conv1d, Dense};
use super::{NeuralError, Parameters, Result, Tensor2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const CONV1_CHANNELS: usize = 20;
const CONV1_KERNEL: usize = 3;
const CONV2_CHANNELS: usize = 10;
const CONV2_KERNEL: usize = 2;
const POOL: usize = 2;
const TDNN_HIDDEN: usize = 30;
const FNN_HIDDEN: usize = 50;

/// Network topology plus input geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// conv(k3, 20) -> pool2 -> conv(k2, 10) -> pool2 -> fc30 -> fc30 -> fc1.
    Tdnn { input_len: usize, in_channels: usize },
    /// fc50 -> fc50 -> fc1 on a flattened input.
    Fnn { input_width: usize },
}

impl Architecture {
    /// The 17 x 45 Mel-spectrogram network.
    pub const MS_LC_TDNN: Architecture = Architecture::Tdnn { input_len: 17, in_channels: 45 };

    /// Expected `(rows, cols)` of the input tensor.
    pub fn input_shape(&self) -> (usize, usize) {
        match *self {
            Architecture::Tdnn { input_len, in_channels } => (input_len, in_channels),
            Architecture::Fnn { input_width } => (1, input_width),
        }
    }
}

/// Time-delay network intermediate shapes, `(time, channels)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TdnnShapes {
    pub input: (usize, usize),
    pub conv1: (usize, usize),
    pub pool1: (usize, usize),
    pub conv2: (usize, usize),
    pub pool2: (usize, usize),
    pub flat: usize,
    pub fc1: usize,
    pub fc2: usize,
    pub out: usize,
}

impl TdnnShapes {
    pub fn for_input(input_len: usize, in_channels: usize) -> Result<Self> {
        if input_len < CONV1_KERNEL {
            return Err(NeuralError::Shape(format!("input length {input_len} shorter than first kernel")));
        }
        let c1 = input_len + 1 - CONV1_KERNEL;
        let p1 = c1 / POOL;
        if p1 < CONV2_KERNEL {
            return Err(NeuralError::Shape(format!("input length {input_len} too short for two conv stages")));
        }
        let c2 = p1 + 1 - CONV2_KERNEL;
        let p2 = c2 / POOL;
        if p2 == 0 {
            return Err(NeuralError::Shape(format!("input length {input_len} pools away to nothing")));
        }
        Ok(Self {
            input: (input_len, in_channels),
            conv1: (c1, CONV1_CHANNELS),
            pool1: (p1, CONV1_CHANNELS),
            conv2: (c2, CONV2_CHANNELS),
            pool2: (p2, CONV2_CHANNELS),
            flat: p2 * CONV2_CHANNELS,
            fc1: TDNN_HIDDEN,
            fc2: TDNN_HIDDEN,
            out: 1,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdnnParams {
    pub conv1: Conv1d,
    pub conv2: Conv1d,
    pub fc1: Dense,
    pub fc2: Dense,
    pub fc3: Dense,
    pub shapes: TdnnShapes,
}

struct TdnnTrace {
    z1: Tensor2,
    a1: Tensor2,
    p1: Tensor2,
    z2: Tensor2,
    a2: Tensor2,
    p2_shape: (usize, usize),
    flat: Vec<f64>,
    h1z: Vec<f64>,
    h1: Vec<f64>,
    h2z: Vec<f64>,
    h2: Vec<f64>,
    out: f64,
}

fn relu_t(x: &Tensor2) -> Tensor2 {
    Tensor2::from_vec(x.rows, x.cols, relu(&x.data))
}

impl TdnnParams {
    pub fn zeros(input_len: usize, in_channels: usize) -> Result<Self> {
        let shapes = TdnnShapes::for_input(input_len, in_channels)?;
        Ok(Self {
            conv1: Conv1d::zeros(CONV1_CHANNELS, in_channels, CONV1_KERNEL),
            conv2: Conv1d::zeros(CONV2_CHANNELS, CONV1_CHANNELS, CONV2_KERNEL),
            fc1: Dense::zeros(TDNN_HIDDEN, shapes.flat),
            fc2: Dense::zeros(TDNN_HIDDEN, TDNN_HIDDEN),
            fc3: Dense::zeros(1, TDNN_HIDDEN),
            shapes,
        })
    }

    pub fn init(input_len: usize, in_channels: usize, seed: u64) -> Result<Self> {
        let shapes = TdnnShapes::for_input(input_len, in_channels)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            conv1: Conv1d::he(CONV1_CHANNELS, in_channels, CONV1_KERNEL, &mut rng),
            conv2: Conv1d::he(CONV2_CHANNELS, CONV1_CHANNELS, CONV2_KERNEL, &mut rng),
            fc1: Dense::he(TDNN_HIDDEN, shapes.flat, &mut rng),
            fc2: Dense::he(TDNN_HIDDEN, TDNN_HIDDEN, &mut rng),
            fc3: Dense::he(1, TDNN_HIDDEN, &mut rng),
            shapes,
        })
    }

    fn check_input(&self, x: &Tensor2) -> Result<()> {
        if (x.rows, x.cols) != self.shapes.input {
            return Err(NeuralError::Shape(format!(
                "tdnn expects input {:?}, got ({}, {})",
                self.shapes.input, x.rows, x.cols
            )));
        }
        Ok(())
    }

    fn trace(&self, x: &Tensor2) -> Result<TdnnTrace> {
        self.check_input(x)?;
        let z1 = self.conv1.forward(x)?;
        let a1 = relu_t(&z1);
        let p1 = avg_pool1d(&a1, POOL, POOL);
        let z2 = self.conv2.forward(&p1)?;
        let a2 = relu_t(&z2);
        let p2 = avg_pool1d(&a2, POOL, POOL);
        debug_assert_eq!((z1.rows, z1.cols), self.shapes.conv1);
        debug_assert_eq!((p1.rows, p1.cols), self.shapes.pool1);
        debug_assert_eq!((z2.rows, z2.cols), self.shapes.conv2);
        debug_assert_eq!((p2.rows, p2.cols), self.shapes.pool2);
        let p2_shape = (p2.rows, p2.cols);
        let flat = p2.data;
        let h1z = self.fc1.forward(&flat)?;
        let h1 = relu(&h1z);
        let h2z = self.fc2.forward(&h1)?;
        let h2 = relu(&h2z);
        let out = self.fc3.forward(&h2)?[0];
        Ok(TdnnTrace { z1, a1, p1, z2, a2, p2_shape, flat, h1z, h1, h2z, h2, out })
    }

    /// Returns the estimate together with every intermediate shape actually produced.
    pub fn forward_with_shapes(&self, x: &Tensor2) -> Result<(f64, TdnnShapes)> {
        let tr = self.trace(x)?;
        let shapes = TdnnShapes {
            input: (x.rows, x.cols),
            conv1: (tr.z1.rows, tr.z1.cols),
            pool1: (tr.p1.rows, tr.p1.cols),
            conv2: (tr.z2.rows, tr.z2.cols),
            pool2: tr.p2_shape,
            flat: tr.flat.len(),
            fc1: tr.h1.len(),
            fc2: tr.h2.len(),
            out: 1,
        };
        Ok((tr.out, shapes))
    }

    pub fn forward(&self, x: &Tensor2) -> Result<f64> {
        Ok(self.trace(x)?.out)
    }

    /// Squared error `(y_hat - y)^2` and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, x: &Tensor2, target: f64) -> Result<(f64, TdnnParams)> {
        let tr = self.trace(x)?;
        let mut g = self.zeros_like();
        let resid = tr.out - target;
        let d_out = [2.0 * resid];
        let d_h2 = self.fc3.backward(&tr.h2, &d_out, &mut g.fc3);
        let d_h2z = relu_backward(&tr.h2z, &d_h2);
        let d_h1 = self.fc2.backward(&tr.h1, &d_h2z, &mut g.fc2);
        let d_h1z = relu_backward(&tr.h1z, &d_h1);
        let d_flat = self.fc1.backward(&tr.flat, &d_h1z, &mut g.fc1);
        let (p2r, p2c) = self.shapes.pool2;
        let d_p2 = Tensor2::from_vec(p2r, p2c, d_flat);
        let d_a2 = avg_pool1d_backward(tr.a2.rows, &d_p2, POOL, POOL);
        let d_z2 = Tensor2::from_vec(d_a2.rows, d_a2.cols, relu_backward(&tr.z2.data, &d_a2.data));
        let d_p1 = self.conv2.backward(&tr.p1, &d_z2, &mut g.conv2);
        let d_a1 = avg_pool1d_backward(tr.a1.rows, &d_p1, POOL, POOL);
        let d_z1 = Tensor2::from_vec(d_a1.rows, d_a1.cols, relu_backward(&tr.z1.data, &d_a1.data));
        self.conv1.backward(x, &d_z1, &mut g.conv1);
        Ok((resid * resid, g))
    }
}

impl Parameters for TdnnParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.conv1.slices();
        v.extend(self.conv2.slices());
        v.extend(self.fc1.slices());
        v.extend(self.fc2.slices());
        v.extend(self.fc3.slices());
        v
    }
    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.conv1.slices_mut();
        v.extend(self.conv2.slices_mut());
        v.extend(self.fc1.slices_mut());
        v.extend(self.fc2.slices_mut());
        v.extend(self.fc3.slices_mut());
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnParams {
    pub fc1: Dense,
    pub fc2: Dense,
    pub fc3: Dense,
}

impl FnnParams {
    pub fn zeros(input_width: usize) -> Self {
        Self {
            fc1: Dense::zeros(FNN_HIDDEN, input_width),
            fc2: Dense::zeros(FNN_HIDDEN, FNN_HIDDEN),
            fc3: Dense::zeros(1, FNN_HIDDEN),
        }
    }

    pub fn init(input_width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            fc1: Dense::he(FNN_HIDDEN, input_width, &mut rng),
            fc2: Dense::he(FNN_HIDDEN, FNN_HIDDEN, &mut rng),
            fc3: Dense::he(1, FNN_HIDDEN, &mut rng),
        }
    }

    pub fn input_width(&self) -> usize {
        self.fc1.n_in
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let h1 = relu(&self.fc1.forward(x)?);
        let h2 = relu(&self.fc2.forward(&h1)?);
        Ok(self.fc3.forward(&h2)?[0])
    }

    pub fn loss_and_grad(&self, x: &[f64], target: f64) -> Result<(f64, FnnParams)> {
        let h1z = self.fc1.forward(x)?;
        let h1 = relu(&h1z);
        let h2z = self.fc2.forward(&h1)?;
        let h2 = relu(&h2z);
        let out = self.fc3.forward(&h2)?[0];
        let mut g = self.zeros_like();
        let resid = out - target;
        let d_h2 = self.fc3.backward(&h2, &[2.0 * resid], &mut g.fc3);
        let d_h1 = self.fc2.backward(&h1, &relu_backward(&h2z, &d_h2), &mut g.fc2);
        self.fc1.backward(x, &relu_backward(&h1z, &d_h1), &mut g.fc1);
        Ok((resid * resid, g))
    }
}

impl Parameters for FnnParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.fc1.slices();
        v.extend(self.fc2.slices());
        v.extend(self.fc3.slices());
        v
    }
    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.fc1.slices_mut();
        v.extend(self.fc2.slices_mut());
        v.extend(self.fc3.slices_mut());
        v
    }
}

/// Either network behind one interface. FNN inputs are flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Tdnn(TdnnParams),
    Fnn(FnnParams),
}

impl Network {
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        Ok(match arch {
            Architecture::Tdnn { input_len, in_channels } => {
                Network::Tdnn(TdnnParams::init(input_len, in_channels, seed)?)
            }
            Architecture::Fnn { input_width } => Network::Fnn(FnnParams::init(input_width, seed)),
        })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        Ok(match arch {
            Architecture::Tdnn { input_len, in_channels } => {
                Network::Tdnn(TdnnParams::zeros(input_len, in_channels)?)
            }
            Architecture::Fnn { input_width } => Network::Fnn(FnnParams::zeros(input_width)),
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Network::Tdnn(p) => Architecture::Tdnn { input_len: p.shapes.input.0, in_channels: p.shapes.input.1 },
            Network::Fnn(p) => Architecture::Fnn { input_width: p.input_width() },
        }
    }

    fn flat_input<'a>(&self, x: &'a Tensor2) -> Result<&'a [f64]> {
        let Network::Fnn(p) = self else { unreachable!() };
        if x.data.len() != p.input_width() {
            return Err(NeuralError::Shape(format!(
                "fnn expects {} inputs, got ({}, {}) = {}",
                p.input_width(),
                x.rows,
                x.cols,
                x.data.len()
            )));
        }
        Ok(&x.data)
    }

    pub fn forward(&self, x: &Tensor2) -> Result<f64> {
        match self {
            Network::Tdnn(p) => p.forward(x),
            Network::Fnn(p) => p.forward(self.flat_input(x)?),
        }
    }

    pub fn loss_and_grad(&self, x: &Tensor2, target: f64) -> Result<(f64, Network)> {
        match self {
            Network::Tdnn(p) => p.loss_and_grad(x, target).map(|(l, g)| (l, Network::Tdnn(g))),
            Network::Fnn(p) => p.loss_and_grad(self.flat_input(x)?, target).map(|(l, g)| (l, Network::Fnn(g))),
        }
    }
}

impl Parameters for Network {
    fn slices(&self) -> Vec<&[f64]> {
        match self {
            Network::Tdnn(p) => p.slices(),
            Network::Fnn(p) => p.slices(),
        }
    }
    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Network::Tdnn(p) => p.slices_mut(),
            Network::Fnn(p) => p.slices_mut(),
        }
    }
}
