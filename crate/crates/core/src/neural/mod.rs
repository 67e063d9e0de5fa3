//! From-scratch network engine with explicit backpropagation.
//!
//! Tensors are `[time x channels]` row-major matrices. Every model type
//! doubles as its own gradient container so Adam can walk parameters and
//! gradients in lockstep.

mod adam;
mod layers;
mod model;
mod train;

pub use adam::AdamState;
pub use layers::{avg_pool1d, avg_pool1d_backward, relu, relu_backward, Conv1d, Dense};
pub use model::{Architecture, FnnParams, Network, TdnnParams, TdnnShapes};
pub use train::{train, TrainConfig, TrainOutcome};

use thiserror::Error;

pub type Tensor2 = crate::dsp::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, NeuralError>;

/// Flat views over every parameter buffer, in a fixed order.
pub trait Parameters: Clone {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.slices_mut().into_iter().for_each(|s| s.fill(0.0));
        z
    }

    fn n_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// `self += scale * other`.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += scale * s);
        }
    }

    fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }
}
