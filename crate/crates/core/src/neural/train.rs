use super::{AdamState, Architecture, Network, NeuralError, Parameters, Result, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 1000, learning_rate: 1e-3, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    /// Full-batch MSE before each update.
    pub loss_history: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Full-batch Adam on mean squared error. Deterministic for a given seed:
/// initialisation is seeded and gradients are summed in dataset order.
pub fn train(arch: Architecture, inputs: &[Tensor2], targets: &[f64], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if inputs.is_empty() {
        return Err(NeuralError::Domain("cannot train on an empty dataset".into()));
    }
    if inputs.len() != targets.len() {
        return Err(NeuralError::Shape(format!("{} inputs but {} targets", inputs.len(), targets.len())));
    }
    let mut net = Network::init(arch, cfg.seed)?;
    let mut adam = AdamState::new(&net, cfg.learning_rate);
    let inv_n = 1.0 / inputs.len() as f64;
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut grad = net.zeros_like();
        let mut loss = 0.0;
        for (x, &y) in inputs.iter().zip(targets) {
            let (l, g) = net.loss_and_grad(x, y)?;
            loss += l;
            grad.add_scaled(&g, inv_n);
        }
        let loss = loss * inv_n;
        if !loss.is_finite() {
            return Err(NeuralError::Domain(format!("training diverged at epoch {}", loss_history.len())));
        }
        loss_history.push(loss);
        adam.step(&mut net, &grad);
    }
    Ok(TrainOutcome { network: net, loss_history })
}
