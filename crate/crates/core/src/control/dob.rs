use std::f64::consts::TAU;

/// Disturbance observer: low-passed `applied - inertia * accel`.
#[derive(Debug, Clone, PartialEq)]
pub struct DobState {
    pub estimate: f64,
    pub cutoff_hz: f64,
}

impl DobState {
    pub fn new(cutoff_hz: f64) -> Self {
        Self { estimate: 0.0, cutoff_hz }
    }

    pub fn time_constant(&self) -> f64 {
        1.0 / (TAU * self.cutoff_hz)
    }

    /// `applied` is the force that produced the measured `accel` over the last tick.
    pub fn update(&mut self, applied: f64, accel: f64, inertia: f64, dt: f64) -> f64 {
        let a = (-TAU * self.cutoff_hz * dt).exp();
        self.estimate = a * self.estimate + (1.0 - a) * (applied - inertia * accel);
        self.estimate
    }

    /// Force command that realises `accel_cmd` on the nominal inertia.
    pub fn compensate(&self, accel_cmd: f64, inertia: f64) -> f64 {
        inertia * accel_cmd + self.estimate
    }
}
