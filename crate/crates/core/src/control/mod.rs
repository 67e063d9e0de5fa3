//! Task-space impedance control with a disturbance observer, trajectories,
//! and the closed-loop runner.

mod dob;
mod loop_runner;
mod trajectory;

pub use dob::DobState;
pub use loop_runner::{
    corrupt_plant, run_closed_loop, ControlError, CSV_HEADER, DIVERGENCE_LIMIT, FeedbackMode, ForceEstimator, LoopConfig, RunLog, RunSample, RunSummary,
};
pub use trajectory::{letter_a_path, letter_a_vertices, press_path, PathParams, Segment, SegmentKind, Trajectory, TrajectoryPoint};

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Diagonal controller gains for all six task-space axes (x, y, z, rx, ry, rz).
pub mod table_ii {
    pub const KP: [f64; 6] = [700.0, 700.0, 150.0, 1500.0, 1500.0, 1500.0];
    pub const KD: [f64; 6] = [70.0, 70.0, 120.0, 80.0, 80.0, 80.0];
    pub const KF: [f64; 6] = [0.0, 0.0, 0.1, 0.0, 0.0, 0.0];
    pub const INERTIA: [f64; 6] = [1.58, 1.40, 0.80, 0.18, 0.16, 0.04];
    pub const DERIV_CUTOFF_HZ: f64 = 10.0;
    pub const SAMPLE_TIME: f64 = 0.001;
    pub const Z: usize = 2;
}

/// Z-axis gains actually used by the 1-DOF loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// 1/s^2
    pub kp: f64,
    /// 1/s
    pub kd: f64,
    /// m/(s^2 N)
    pub kf: f64,
    /// Nominal inertia, kg.
    pub inertia: f64,
    pub deriv_cutoff_hz: f64,
    pub dob_cutoff_hz: f64,
    pub dt: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self::for_axis(table_ii::Z)
    }
}

impl ControllerGains {
    pub fn for_axis(axis: usize) -> Self {
        Self {
            kp: table_ii::KP[axis],
            kd: table_ii::KD[axis],
            kf: table_ii::KF[axis],
            inertia: table_ii::INERTIA[axis],
            deriv_cutoff_hz: table_ii::DERIV_CUTOFF_HZ,
            dob_cutoff_hz: 50.0,
            dt: table_ii::SAMPLE_TIME,
        }
    }
}

/// `kp (p_cmd - p) + kd (v_cmd - v_filtered) + kf (f_cmd - f_feedback)`.
pub fn impedance_accel_ref(
    gains: &ControllerGains,
    p_cmd: f64,
    p_res: f64,
    v_cmd: f64,
    v_res_filtered: f64,
    f_cmd: f64,
    f_feedback: f64,
) -> f64 {
    gains.kp * (p_cmd - p_res) + gains.kd * (v_cmd - v_res_filtered) + gains.kf * (f_cmd - f_feedback)
}

/// Pseudo-derivative: backward difference through a first-order low-pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeFilter {
    alpha: f64,
    dt: f64,
    prev: Option<f64>,
    value: f64,
}

impl DerivativeFilter {
    pub fn new(cutoff_hz: f64, dt: f64) -> Self {
        Self { alpha: (-TAU * cutoff_hz * dt).exp(), dt, prev: None, value: 0.0 }
    }

    pub fn update(&mut self, x: f64) -> f64 {
        let raw = self.prev.map_or(0.0, |p| (x - p) / self.dt);
        self.prev = Some(x);
        self.value = self.alpha * self.value + (1.0 - self.alpha) * raw;
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Impedance law plus derivative filter plus DOB, one tick at a time.
#[derive(Debug, Clone)]
pub struct ImpedanceController {
    pub gains: ControllerGains,
    deriv: DerivativeFilter,
    pub dob: DobState,
    last_drive: f64,
    last_velocity: Option<f64>,
}

impl ImpedanceController {
    pub fn new(gains: ControllerGains) -> Self {
        Self {
            gains,
            deriv: DerivativeFilter::new(gains.deriv_cutoff_hz, gains.dt),
            dob: DobState::new(gains.dob_cutoff_hz),
            last_drive: 0.0,
            last_velocity: None,
        }
    }

    /// Returns the actuator force for this tick.
    pub fn tick(&mut self, p_cmd: f64, v_cmd: f64, f_cmd: f64, p_res: f64, v_res: f64, f_feedback: f64) -> f64 {
        let v_f = self.deriv.update(p_res);
        let a_ref = impedance_accel_ref(&self.gains, p_cmd, p_res, v_cmd, v_f, f_cmd, f_feedback);
        let accel = self.last_velocity.map_or(0.0, |v| (v_res - v) / self.gains.dt);
        self.last_velocity = Some(v_res);
        self.dob.update(self.last_drive, accel, self.gains.inertia, self.gains.dt);
        let drive = self.dob.compensate(a_ref, self.gains.inertia);
        self.last_drive = drive;
        drive
    }
}
